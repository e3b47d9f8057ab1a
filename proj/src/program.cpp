#include "fliptrace/program.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <utility>

namespace fliptrace {

namespace {

constexpr std::array<std::pair<Opcode, const char*>, 30> kOpcodeNames{{
    {Opcode::iadd, "iadd"},
    {Opcode::isub, "isub"},
    {Opcode::imul, "imul"},
    {Opcode::idiv, "idiv"},
    {Opcode::fadd, "fadd"},
    {Opcode::fsub, "fsub"},
    {Opcode::fmul, "fmul"},
    {Opcode::fdiv, "fdiv"},
    {Opcode::icmp_lt, "icmp.lt"},
    {Opcode::icmp_le, "icmp.le"},
    {Opcode::icmp_eq, "icmp.eq"},
    {Opcode::icmp_ne, "icmp.ne"},
    {Opcode::fcmp_lt, "fcmp.lt"},
    {Opcode::fcmp_le, "fcmp.le"},
    {Opcode::fcmp_eq, "fcmp.eq"},
    {Opcode::fcmp_ne, "fcmp.ne"},
    {Opcode::shl, "shl"},
    {Opcode::shr, "shr"},
    {Opcode::trunc_f2i, "trunc_f2i"},
    {Opcode::ext_i2f, "ext_i2f"},
    {Opcode::load, "load"},
    {Opcode::store, "store"},
    {Opcode::br, "br"},
    {Opcode::br_cond, "br_cond"},
    {Opcode::call, "call"},
    {Opcode::ret, "ret"},
    {Opcode::print, "print"},
    {Opcode::region_begin, "region_begin"},
    {Opcode::region_end, "region_end"},
    {Opcode::verify_check, "verify_check"},
}};

} // namespace

const char* opcode_name(Opcode op) {
    for (const auto& [code, name] : kOpcodeNames) {
        if (code == op) return name;
    }
    return "?";
}

std::optional<Opcode> opcode_from_name(const std::string& name) {
    for (const auto& [code, n] : kOpcodeNames) {
        if (name == n) return code;
    }
    return std::nullopt;
}

bool is_int_arith(Opcode op) {
    return op == Opcode::iadd || op == Opcode::isub || op == Opcode::imul ||
           op == Opcode::idiv;
}

bool is_float_arith(Opcode op) {
    return op == Opcode::fadd || op == Opcode::fsub || op == Opcode::fmul ||
           op == Opcode::fdiv;
}

bool is_icmp(Opcode op) {
    return op == Opcode::icmp_lt || op == Opcode::icmp_le || op == Opcode::icmp_eq ||
           op == Opcode::icmp_ne;
}

bool is_fcmp(Opcode op) {
    return op == Opcode::fcmp_lt || op == Opcode::fcmp_le || op == Opcode::fcmp_eq ||
           op == Opcode::fcmp_ne;
}

bool is_add_or_mul(Opcode op) {
    return op == Opcode::iadd || op == Opcode::isub || op == Opcode::imul ||
           op == Opcode::fadd || op == Opcode::fsub || op == Opcode::fmul;
}

bool is_add(Opcode op) {
    return op == Opcode::iadd || op == Opcode::fadd;
}

std::string Program::location_name(const Location& loc) const {
    if (loc.kind == LocationKind::mem) {
        return "M[" + std::to_string(loc.index) + "]";
    }
    if (loc.index < reg_names.size()) return reg_names[loc.index];
    return "%r" + std::to_string(loc.index);
}

std::string Value::to_string() const {
    char buf[40];
    if (is_int()) {
        std::snprintf(buf, sizeof buf, "%" PRId64, i64());
    } else {
        std::snprintf(buf, sizeof buf, "%.17g", f64());
    }
    return buf;
}

Value flip_bit(Value v, uint32_t bit) {
    return Value::from_bits(v.tag(), v.bits() ^ (uint64_t{1} << (bit & 63)));
}

} // namespace fliptrace
