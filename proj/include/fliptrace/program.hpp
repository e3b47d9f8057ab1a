#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fliptrace/value.hpp"

namespace fliptrace {

enum class Opcode : uint8_t {
    iadd, isub, imul, idiv,
    fadd, fsub, fmul, fdiv,
    icmp_lt, icmp_le, icmp_eq, icmp_ne,
    fcmp_lt, fcmp_le, fcmp_eq, fcmp_ne,
    shl, shr,
    trunc_f2i, ext_i2f,
    load, store,
    br, br_cond, call, ret,
    print,
    region_begin, region_end,
    verify_check,
};

const char* opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(const std::string& name);

bool is_int_arith(Opcode op);
bool is_float_arith(Opcode op);
bool is_icmp(Opcode op);
bool is_fcmp(Opcode op);
/// Opcodes that aggregate values: integer/float add, sub and mul.
bool is_add_or_mul(Opcode op);
/// Plain additive update opcodes (iadd/fadd), used by accumulation detection.
bool is_add(Opcode op);

/// A memory address expression `M[base + offset]`; `base` is either a
/// register or an absolute cell index.
struct MemRef {
    bool has_base_reg = false;
    uint32_t base_reg = 0;    // program-wide register slot
    int64_t offset = 0;       // cell index when no base register
};

struct Operand {
    enum class Kind : uint8_t { reg, mem, imm, label, func };
    Kind kind = Kind::imm;
    uint32_t reg = 0;      // Kind::reg
    MemRef mem;            // Kind::mem
    Value imm;             // Kind::imm
    uint32_t target = 0;   // Kind::label -> instruction index, Kind::func -> function index

    static Operand make_reg(uint32_t slot) {
        Operand o;
        o.kind = Kind::reg;
        o.reg = slot;
        return o;
    }
    static Operand make_imm(Value v) {
        Operand o;
        o.kind = Kind::imm;
        o.imm = v;
        return o;
    }
};

struct Instruction {
    Opcode op;
    std::vector<Operand> operands;
    std::optional<uint32_t> result_reg;  // program-wide register slot
    uint32_t src_line = 0;               // 1-based line in the source text
    int32_t region_id = -1;              // region_begin/region_end payload
    int print_digits = 0;                // print: significant digits, 0 = exact
};

struct Function {
    std::string name;
    std::vector<Instruction> instrs;
    uint32_t first_reg_slot = 0;
    uint32_t num_regs = 0;
};

/// Output locations checked by `verify_check` against the golden run's
/// values, within a relative tolerance.
struct VerifySpec {
    std::vector<Location> outputs;
    double rel_tol = 1e-10;
};

struct Program {
    std::vector<Function> functions;
    uint32_t entry_index = 0;
    uint64_t memory_size = 1024;
    std::optional<VerifySpec> verify;

    // Register slots are program-wide; each function owns a contiguous range.
    std::vector<std::string> reg_names;       // slot -> "%name"
    std::vector<uint32_t> reg_owner;          // slot -> function index

    uint64_t hash = 0;  // FNV-1a over a canonical rendering, set by the parser

    const Function& entry() const { return functions[entry_index]; }
    std::string location_name(const Location& loc) const;
};

struct ParseError : std::runtime_error {
    ParseError(uint32_t line, uint32_t col, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(col) +
                             ": " + message),
          line(line), col(col) {}
    uint32_t line;
    uint32_t col;
};

/// Parses and validates mini-IR source text (grammar in docs/mini-ir.md).
/// Throws ParseError with line/column on any syntax or validation failure.
Program parse_program(std::string_view text);

} // namespace fliptrace
