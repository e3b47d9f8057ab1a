#include "fliptrace/interp.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace fliptrace {

namespace {

struct Trap {
    std::string reason;
};

class Machine {
public:
    Machine(const Program& prog, const InputMap& input,
            const std::optional<FaultSpec>& fault, const ExecOptions& opts)
        : prog_(prog), fault_(fault), opts_(opts) {
        regs_.assign(prog.reg_names.size(), Value());
        mem_.assign(prog.memory_size, Value());
        for (const auto& [loc, v] : input) {
            if (loc.kind == LocationKind::mem) {
                if (loc.index >= mem_.size()) {
                    throw std::invalid_argument("input cell out of bounds: M[" +
                                                std::to_string(loc.index) + "]");
                }
                mem_[loc.index] = v;
            } else {
                if (loc.index >= regs_.size()) {
                    throw std::invalid_argument("input register slot out of range");
                }
                regs_[loc.index] = v;
            }
        }
        if (opts.record_trace) {
            outcome_.trace.program_hash = prog.hash;
            outcome_.trace.reg_names = prog.reg_names;
        }
    }

    RunOutcome run() {
        try {
            run_function(prog_.entry_index);
            outcome_.status = RunStatus::completed;
        } catch (const Trap& t) {
            outcome_.status = RunStatus::trapped;
            outcome_.trap_reason = t.reason;
            outcome_.trap_index = index_;
        } catch (const HungSignal&) {
            outcome_.status = RunStatus::hung;
        }
        outcome_.instruction_count = index_;
        collect_outputs();
        return std::move(outcome_);
    }

private:
    struct HungSignal {};

    const Program& prog_;
    const std::optional<FaultSpec>& fault_;
    const ExecOptions& opts_;
    RunOutcome outcome_;
    std::vector<Value> regs_;
    std::vector<Value> mem_;
    std::vector<int32_t> region_stack_;
    uint64_t index_ = 0;       // next dynamic instruction index
    bool verify_failed_ = false;
    bool verify_seen_ = false;

    // Per-event scratch, rebuilt for each instruction.
    std::vector<Location> ev_locs_;
    std::vector<Value> ev_vals_;
    std::vector<Value> ev_consts_;
    uint8_t ev_addr_mask_ = 0;
    uint32_t next_slot_ = 0;

    bool fault_here() const {
        return fault_ && fault_->instr_index == index_;
    }

    Value read_location(const Location& loc) const {
        return loc.kind == LocationKind::reg ? regs_[loc.index] : mem_[loc.index];
    }

    void write_location(const Location& loc, Value v) {
        if (loc.kind == LocationKind::reg) {
            regs_[loc.index] = v;
        } else {
            mem_[loc.index] = v;
        }
    }

    /// Reads one location-backed operand, applying the operand-target fault
    /// to the location's storage first when this slot is the chosen one.
    Value read_operand_loc(const Location& loc) {
        if (fault_here() && !fault_->target_result && fault_->operand_slot == next_slot_) {
            write_location(loc, flip_bit(read_location(loc), fault_->bit));
        }
        ++next_slot_;
        Value v = read_location(loc);
        ev_locs_.push_back(loc);
        ev_vals_.push_back(v);
        return v;
    }

    Value eval_operand(const Operand& op) {
        switch (op.kind) {
        case Operand::Kind::reg:
            return read_operand_loc(Location::make_reg(op.reg));
        case Operand::Kind::imm:
            ev_consts_.push_back(op.imm);
            return op.imm;
        default:
            throw std::logic_error("operand is not a value");
        }
    }

    uint64_t eval_address(const MemRef& mem) {
        int64_t base = 0;
        if (mem.has_base_reg) {
            if (next_slot_ < 8) ev_addr_mask_ |= static_cast<uint8_t>(1u << next_slot_);
            Value v = read_operand_loc(Location::make_reg(mem.base_reg));
            if (!v.is_int()) throw Trap{"type mismatch: address must be Int64"};
            base = v.i64();
        }
        int64_t cell = base + mem.offset;
        if (cell < 0 || static_cast<uint64_t>(cell) >= mem_.size()) {
            throw Trap{"memory out of bounds"};
        }
        return static_cast<uint64_t>(cell);
    }

    int64_t want_int(Value v) {
        if (!v.is_int()) throw Trap{"type mismatch: expected Int64"};
        return v.i64();
    }

    double want_float(Value v) {
        if (!v.is_float()) throw Trap{"type mismatch: expected Float64"};
        return v.f64();
    }

    void retire(const Instruction& in, std::optional<Location> result_loc,
                std::optional<Value> result_value) {
        if (opts_.record_trace) {
            TraceEvent ev;
            ev.index = index_;
            ev.op = in.op;
            ev.src_line = in.src_line;
            ev.region_id = region_stack_.empty() ? -1 : region_stack_.back();
            ev.operand_locs = std::move(ev_locs_);
            ev.operand_values = std::move(ev_vals_);
            ev.const_operands = std::move(ev_consts_);
            ev.address_mask = ev_addr_mask_;
            ev.print_digits = static_cast<uint8_t>(in.print_digits);
            ev.result_loc = result_loc;
            ev.result_value = result_value;
            outcome_.trace.events.push_back(std::move(ev));
        }
        ++index_;
        if (index_ >= opts_.budget) throw HungSignal{};
    }

    /// Applies the result-target fault, writes the result, and retires.
    void finish_value(const Instruction& in, const Location& loc, Value v) {
        if (fault_here() && fault_->target_result) {
            v = flip_bit(v, fault_->bit);
        }
        write_location(loc, v);
        retire(in, loc, v);
    }

    void run_function(uint32_t func_index) {
        const Function& fn = prog_.functions[func_index];
        // Static frame: this function's registers reset on every invocation.
        for (uint32_t i = 0; i < fn.num_regs; ++i) {
            regs_[fn.first_reg_slot + i] = Value();
        }
        size_t pc = 0;
        while (pc < fn.instrs.size()) {
            const Instruction& in = fn.instrs[pc];
            ev_locs_.clear();
            ev_vals_.clear();
            ev_consts_.clear();
            ev_addr_mask_ = 0;
            next_slot_ = 0;
            if (fault_here()) {
                // Validated lazily: the chosen slot must exist on this event.
                if (fault_->target_result) {
                    if (!in.result_reg && in.op != Opcode::store) {
                        throw std::invalid_argument(
                            "fault targets the result of a value-free instruction at index " +
                            std::to_string(fault_->instr_index));
                    }
                } else {
                    validate_operand_slot(in);
                }
            }
            switch (in.op) {
            case Opcode::iadd: case Opcode::isub: case Opcode::imul: case Opcode::idiv: {
                int64_t a = want_int(eval_operand(in.operands[0]));
                int64_t b = want_int(eval_operand(in.operands[1]));
                int64_t r = 0;
                switch (in.op) {
                case Opcode::iadd: r = static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b)); break;
                case Opcode::isub: r = static_cast<int64_t>(static_cast<uint64_t>(a) - static_cast<uint64_t>(b)); break;
                case Opcode::imul: r = static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b)); break;
                default:
                    if (b == 0) throw Trap{"integer divide by zero"};
                    if (a == std::numeric_limits<int64_t>::min() && b == -1) {
                        throw Trap{"integer divide overflow"};
                    }
                    r = a / b;
                }
                finish_value(in, Location::make_reg(*in.result_reg), Value::of_i64(r));
                ++pc;
                break;
            }
            case Opcode::fadd: case Opcode::fsub: case Opcode::fmul: case Opcode::fdiv: {
                double a = want_float(eval_operand(in.operands[0]));
                double b = want_float(eval_operand(in.operands[1]));
                double r = in.op == Opcode::fadd   ? a + b
                           : in.op == Opcode::fsub ? a - b
                           : in.op == Opcode::fmul ? a * b
                                                   : a / b;  // IEEE: /0 gives inf
                finish_value(in, Location::make_reg(*in.result_reg), Value::of_f64(r));
                ++pc;
                break;
            }
            case Opcode::icmp_lt: case Opcode::icmp_le: case Opcode::icmp_eq: case Opcode::icmp_ne: {
                int64_t a = want_int(eval_operand(in.operands[0]));
                int64_t b = want_int(eval_operand(in.operands[1]));
                bool r = in.op == Opcode::icmp_lt   ? a < b
                         : in.op == Opcode::icmp_le ? a <= b
                         : in.op == Opcode::icmp_eq ? a == b
                                                    : a != b;
                finish_value(in, Location::make_reg(*in.result_reg), Value::of_i64(r ? 1 : 0));
                ++pc;
                break;
            }
            case Opcode::fcmp_lt: case Opcode::fcmp_le: case Opcode::fcmp_eq: case Opcode::fcmp_ne: {
                double a = want_float(eval_operand(in.operands[0]));
                double b = want_float(eval_operand(in.operands[1]));
                // Any NaN operand makes the comparison false.
                bool r = false;
                if (!std::isnan(a) && !std::isnan(b)) {
                    r = in.op == Opcode::fcmp_lt   ? a < b
                        : in.op == Opcode::fcmp_le ? a <= b
                        : in.op == Opcode::fcmp_eq ? a == b
                                                   : a != b;
                }
                finish_value(in, Location::make_reg(*in.result_reg), Value::of_i64(r ? 1 : 0));
                ++pc;
                break;
            }
            case Opcode::shl: case Opcode::shr: {
                Value av = eval_operand(in.operands[0]);
                int64_t amt = want_int(eval_operand(in.operands[1]));
                if (!av.is_int()) throw Trap{"type mismatch: expected Int64"};
                if (amt < 0 || amt > 63) throw Trap{"shift amount out of range"};
                uint64_t bits = av.bits();
                uint64_t r = in.op == Opcode::shl ? bits << amt : bits >> amt;
                finish_value(in, Location::make_reg(*in.result_reg),
                             Value::from_bits(ValueTag::int64, r));
                ++pc;
                break;
            }
            case Opcode::trunc_f2i: {
                double a = want_float(eval_operand(in.operands[0]));
                if (std::isnan(a) || a >= 9.223372036854775808e18 || a < -9.223372036854775808e18) {
                    throw Trap{"invalid float to int conversion"};
                }
                finish_value(in, Location::make_reg(*in.result_reg),
                             Value::of_i64(static_cast<int64_t>(a)));
                ++pc;
                break;
            }
            case Opcode::ext_i2f: {
                int64_t a = want_int(eval_operand(in.operands[0]));
                finish_value(in, Location::make_reg(*in.result_reg),
                             Value::of_f64(static_cast<double>(a)));
                ++pc;
                break;
            }
            case Opcode::load: {
                uint64_t cell = eval_address(in.operands[0].mem);
                Value v = read_operand_loc(Location::make_mem(cell));
                finish_value(in, Location::make_reg(*in.result_reg), v);
                ++pc;
                break;
            }
            case Opcode::store: {
                uint64_t cell = eval_address(in.operands[0].mem);
                Value v = eval_operand(in.operands[1]);
                finish_value(in, Location::make_mem(cell), v);
                ++pc;
                break;
            }
            case Opcode::br: {
                size_t target = in.operands[0].target;
                if (target > fn.instrs.size()) throw Trap{"invalid jump"};
                retire(in, std::nullopt, std::nullopt);
                pc = target;
                break;
            }
            case Opcode::br_cond: {
                Value c = eval_operand(in.operands[0]);
                if (!c.is_int()) throw Trap{"type mismatch: branch predicate must be Int64"};
                size_t target = c.i64() != 0 ? in.operands[1].target : in.operands[2].target;
                if (target > fn.instrs.size()) throw Trap{"invalid jump"};
                retire(in, std::nullopt, std::nullopt);
                pc = target;
                break;
            }
            case Opcode::call: {
                retire(in, std::nullopt, std::nullopt);
                run_function(in.operands[0].target);
                ++pc;
                break;
            }
            case Opcode::ret:
                retire(in, std::nullopt, std::nullopt);
                return;
            case Opcode::print: {
                PrintRecord rec;
                rec.index = index_;
                rec.digits = in.print_digits;
                if (in.operands[0].kind == Operand::Kind::imm) {
                    rec.has_loc = false;
                    rec.value = eval_operand(in.operands[0]);
                } else if (in.operands[0].kind == Operand::Kind::mem) {
                    uint64_t cell = eval_address(in.operands[0].mem);
                    rec.loc = Location::make_mem(cell);
                    rec.value = read_operand_loc(rec.loc);
                } else {
                    rec.loc = Location::make_reg(in.operands[0].reg);
                    rec.value = eval_operand(in.operands[0]);
                }
                rec.formatted = format_print_value(rec.value, rec.digits);
                outcome_.prints.push_back(std::move(rec));
                retire(in, std::nullopt, std::nullopt);
                ++pc;
                break;
            }
            case Opcode::region_begin:
                region_stack_.push_back(in.region_id);
                retire(in, std::nullopt, std::nullopt);
                ++pc;
                break;
            case Opcode::region_end:
                retire(in, std::nullopt, std::nullopt);
                if (!region_stack_.empty()) region_stack_.pop_back();
                ++pc;
                break;
            case Opcode::verify_check: {
                verify_seen_ = true;
                if (prog_.verify) {
                    double tol = opts_.verify_tol.value_or(prog_.verify->rel_tol);
                    for (const auto& loc : prog_.verify->outputs) {
                        Value cur = read_operand_loc(loc);
                        if (!opts_.expected_outputs) continue;
                        auto it = opts_.expected_outputs->find(loc);
                        if (it == opts_.expected_outputs->end()) {
                            verify_failed_ = true;
                            continue;
                        }
                        if (!value_within_tol(cur, it->second, tol)) verify_failed_ = true;
                    }
                }
                retire(in, std::nullopt, std::nullopt);
                ++pc;
                break;
            }
            }
        }
        // Falling off the end of a function behaves like ret.
    }

    void validate_operand_slot(const Instruction& in) {
        uint32_t n = 0;
        for (const auto& op : in.operands) {
            if (op.kind == Operand::Kind::reg) ++n;
            if (op.kind == Operand::Kind::mem) {
                if (op.mem.has_base_reg) ++n;
                if (in.op == Opcode::load) ++n;  // the loaded cell
            }
        }
        if (in.op == Opcode::verify_check && prog_.verify) {
            n += static_cast<uint32_t>(prog_.verify->outputs.size());
        }
        if (fault_->operand_slot >= n) {
            throw std::invalid_argument(
                "fault operand slot " + std::to_string(fault_->operand_slot) +
                " out of range at dynamic index " + std::to_string(fault_->instr_index));
        }
    }

    static bool value_within_tol(Value cur, Value expected, double tol) {
        if (cur == expected) return true;
        if (cur.tag() != expected.tag()) return false;
        if (!cur.is_float()) return false;
        double a = cur.f64(), b = expected.f64();
        if (std::isnan(a) || std::isnan(b)) return false;
        return std::fabs(a - b) <= tol * std::fabs(b);
    }

    void collect_outputs() {
        if (prog_.verify) {
            for (const auto& loc : prog_.verify->outputs) {
                outcome_.outputs[loc] = read_location(loc);
            }
            if (verify_seen_) {
                outcome_.verify = verify_failed_ ? VerifyOutcome::failed : VerifyOutcome::passed;
            }
        } else {
            for (const auto& rec : outcome_.prints) {
                if (rec.has_loc) outcome_.outputs[rec.loc] = rec.value;
            }
        }
    }
};

} // namespace

RunOutcome execute(const Program& program, const InputMap& input,
                   const std::optional<FaultSpec>& fault, const ExecOptions& opts) {
    if (opts.budget < 1) throw std::invalid_argument("budget must be >= 1");
    Machine m(program, input, fault, opts);
    return m.run();
}

std::string format_print_value(Value v, int digits) {
    char buf[48];
    if (digits <= 0) {
        if (v.is_int()) {
            std::snprintf(buf, sizeof buf, "%" PRId64, v.i64());
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", v.f64());
        }
    } else if (v.is_int()) {
        std::snprintf(buf, sizeof buf, "%.*e", digits - 1, static_cast<double>(v.i64()));
    } else {
        std::snprintf(buf, sizeof buf, "%.*e", digits - 1, v.f64());
    }
    return buf;
}

} // namespace fliptrace
