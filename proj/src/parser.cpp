#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "fliptrace/program.hpp"

namespace fliptrace {

namespace {

struct Cursor {
    std::string_view text;
    size_t pos = 0;
    uint32_t line_no = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= text.size();
    }
    uint32_t col() const { return static_cast<uint32_t>(pos) + 1; }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c, const char* what) {
        if (!eat(c)) {
            throw ParseError(line_no, col(), std::string("expected '") + c + "' " + what);
        }
    }
    std::string ident() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_' ||
                text[pos] == '.')) {
            ++pos;
        }
        if (pos == start) throw ParseError(line_no, col(), "expected identifier");
        return std::string(text.substr(start, pos - start));
    }
};

bool looks_like_float(std::string_view tok) {
    return tok.find('.') != std::string_view::npos ||
           ((tok.find('e') != std::string_view::npos || tok.find('E') != std::string_view::npos) &&
            tok.rfind("0x", 0) != 0 && tok.rfind("-0x", 0) != 0);
}

struct PendingBranch {
    uint32_t func = 0;
    size_t instr = 0;
    size_t operand = 0;
    std::string label;
    uint32_t line = 0;
};

struct PendingCall {
    uint32_t func = 0;
    size_t instr = 0;
    std::string callee;
    uint32_t line = 0;
};

struct PendingVerifyReg {
    std::string name;
    uint32_t line = 0;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Program run() {
        parse_lines();
        resolve();
        validate();
        prog_.hash = compute_hash();
        return std::move(prog_);
    }

private:
    std::string_view text_;
    Program prog_;
    std::unordered_map<std::string, uint32_t> func_index_;
    std::vector<std::unordered_map<std::string, uint32_t>> func_regs_;  // name -> global slot
    std::vector<std::unordered_map<std::string, uint32_t>> func_labels_; // name -> instr index
    std::vector<PendingBranch> pending_branches_;
    std::vector<PendingCall> pending_calls_;
    std::vector<PendingVerifyReg> pending_verify_regs_;
    std::vector<Location> verify_mems_;
    std::optional<double> verify_tol_;
    bool saw_verify_ = false;
    std::string entry_name_ = "main";
    int32_t cur_func_ = -1;

    Function& cur() {
        return prog_.functions[static_cast<size_t>(cur_func_)];
    }

    void parse_lines() {
        std::istringstream stream{std::string(text_)};
        std::string raw;
        uint32_t line_no = 0;
        while (std::getline(stream, raw)) {
            ++line_no;
            size_t comment = raw.find(';');
            if (comment != std::string::npos) raw.resize(comment);
            while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ' || raw.back() == '\t')) {
                raw.pop_back();
            }
            Cursor cur{raw, 0, line_no};
            if (cur.done()) continue;
            parse_line(cur);
        }
        if (saw_verify_) {
            VerifySpec spec;
            spec.rel_tol = verify_tol_.value_or(1e-10);
            spec.outputs = verify_mems_;
            prog_.verify = spec;
        }
    }

    void parse_line(Cursor& c) {
        char first = c.peek();
        if (first == '.') {
            parse_directive(c);
            return;
        }
        if (first == '@') {
            c.eat('@');
            std::string kw = c.ident();
            if (kw != "func") throw ParseError(c.line_no, c.col(), "expected '@func'");
            std::string name = c.ident();
            if (func_index_.count(name)) {
                throw ParseError(c.line_no, c.col(), "duplicate function '" + name + "'");
            }
            func_index_[name] = static_cast<uint32_t>(prog_.functions.size());
            Function fn;
            fn.name = name;
            fn.first_reg_slot = static_cast<uint32_t>(prog_.reg_names.size());
            prog_.functions.push_back(std::move(fn));
            func_regs_.emplace_back();
            func_labels_.emplace_back();
            cur_func_ = static_cast<int32_t>(prog_.functions.size()) - 1;
            end_of_line(c);
            return;
        }
        if (first == '#') {
            c.eat('#');
            std::string kw = c.ident();
            Instruction in;
            if (kw == "region") {
                in.op = Opcode::region_begin;
            } else if (kw == "endregion") {
                in.op = Opcode::region_end;
            } else {
                throw ParseError(c.line_no, c.col(), "unknown marker '#" + kw + "'");
            }
            in.region_id = static_cast<int32_t>(parse_int(c, "region id"));
            in.src_line = c.line_no;
            append(in, c);
            end_of_line(c);
            return;
        }
        if (cur_func_ < 0) {
            throw ParseError(c.line_no, c.col(), "instruction outside of a function");
        }
        // Either "label:", "%r = op ...", or "op ...".
        size_t save = c.pos;
        if (first != '%') {
            std::string word = c.ident();
            if (c.eat(':')) {
                if (!func_labels_.back().emplace(word, cur().instrs.size()).second) {
                    throw ParseError(c.line_no, c.col(), "duplicate label '" + word + "'");
                }
                if (!c.done()) {
                    throw ParseError(c.line_no, c.col(), "trailing tokens after label");
                }
                return;
            }
            c.pos = save;
        }
        parse_instruction(c);
    }

    void parse_directive(Cursor& c) {
        c.eat('.');
        std::string kw = c.ident();
        if (kw == "entry") {
            entry_name_ = c.ident();
        } else if (kw == "memory") {
            int64_t n = parse_int(c, "memory size");
            if (n < 1 || n > (int64_t{1} << 24)) {
                throw ParseError(c.line_no, c.col(), "memory size out of range");
            }
            prog_.memory_size = static_cast<uint64_t>(n);
        } else if (kw == "verify") {
            saw_verify_ = true;
            std::string tolkw = c.ident();
            if (tolkw != "tol") throw ParseError(c.line_no, c.col(), "expected 'tol'");
            verify_tol_ = parse_float(c, "tolerance");
            while (!c.done()) {
                c.eat(',');
                if (c.done()) break;
                if (c.peek() == '%') {
                    c.eat('%');
                    pending_verify_regs_.push_back({c.ident(), c.line_no});
                } else if (c.peek() == 'M') {
                    std::string m = c.ident();
                    if (m != "M") throw ParseError(c.line_no, c.col(), "expected location");
                    c.expect('[', "in memory location");
                    int64_t cell = parse_int(c, "cell index");
                    c.expect(']', "in memory location");
                    if (cell < 0) throw ParseError(c.line_no, c.col(), "negative cell index");
                    verify_mems_.push_back(Location::make_mem(static_cast<uint64_t>(cell)));
                } else {
                    throw ParseError(c.line_no, c.col(), "expected location");
                }
            }
            return;
        } else {
            throw ParseError(c.line_no, c.col(), "unknown directive '." + kw + "'");
        }
        end_of_line(c);
    }

    int64_t parse_int(Cursor& c, const char* what) {
        c.skip_ws();
        size_t start = c.pos;
        if (c.pos < c.text.size() && (c.text[c.pos] == '-' || c.text[c.pos] == '+')) ++c.pos;
        while (c.pos < c.text.size() &&
               (std::isalnum(static_cast<unsigned char>(c.text[c.pos])))) {
            ++c.pos;
        }
        std::string tok(c.text.substr(start, c.pos - start));
        if (tok.empty()) throw ParseError(c.line_no, c.col(), std::string("expected ") + what);
        errno = 0;
        char* end = nullptr;
        long long v = std::strtoll(tok.c_str(), &end, 0);
        if (errno != 0 || end == tok.c_str() || *end != '\0') {
            throw ParseError(c.line_no, c.col(), "bad integer '" + tok + "'");
        }
        return v;
    }

    double parse_float(Cursor& c, const char* what) {
        c.skip_ws();
        size_t start = c.pos;
        while (c.pos < c.text.size() && c.text[c.pos] != ' ' && c.text[c.pos] != '\t' &&
               c.text[c.pos] != ',') {
            ++c.pos;
        }
        std::string tok(c.text.substr(start, c.pos - start));
        if (tok.empty()) throw ParseError(c.line_no, c.col(), std::string("expected ") + what);
        errno = 0;
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (errno == ERANGE || end == tok.c_str() || *end != '\0') {
            throw ParseError(c.line_no, c.col(), "bad number '" + tok + "'");
        }
        return v;
    }

    uint32_t intern_reg(const std::string& name) {
        auto& regs = func_regs_[static_cast<size_t>(cur_func_)];
        auto it = regs.find(name);
        if (it != regs.end()) return it->second;
        uint32_t slot = static_cast<uint32_t>(prog_.reg_names.size());
        prog_.reg_names.push_back("%" + name);
        prog_.reg_owner.push_back(static_cast<uint32_t>(cur_func_));
        regs.emplace(name, slot);
        cur().num_regs++;
        return slot;
    }

    Operand parse_operand(Cursor& c, bool float_ctx) {
        if (c.peek() == '%') {
            c.eat('%');
            return Operand::make_reg(intern_reg(c.ident()));
        }
        if (c.peek() == 'M' || c.peek() == '@') {
            if (c.eat('@')) {
                Operand o;
                o.kind = Operand::Kind::func;
                pending_calls_.push_back({static_cast<uint32_t>(cur_func_),
                                          cur().instrs.size(), c.ident(), c.line_no});
                return o;
            }
            size_t save = c.pos;
            std::string word = c.ident();
            if (word == "M" && c.peek() == '[') {
                return parse_memref(c);
            }
            c.pos = save;
            // Fall through: a bare identifier is a label reference.
            Operand o;
            o.kind = Operand::Kind::label;
            pending_branches_.push_back({static_cast<uint32_t>(cur_func_),
                                         cur().instrs.size(), 0, c.ident(), c.line_no});
            return o;
        }
        char ch = c.peek();
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            Operand o;
            o.kind = Operand::Kind::label;
            pending_branches_.push_back({static_cast<uint32_t>(cur_func_),
                                         cur().instrs.size(), 0, c.ident(), c.line_no});
            return o;
        }
        // Literal.
        c.skip_ws();
        size_t start = c.pos;
        while (c.pos < c.text.size() && c.text[c.pos] != ' ' && c.text[c.pos] != '\t' &&
               c.text[c.pos] != ',') {
            ++c.pos;
        }
        std::string tok(c.text.substr(start, c.pos - start));
        if (tok.empty()) throw ParseError(c.line_no, c.col(), "expected operand");
        if (looks_like_float(tok) || float_ctx) {
            if (!looks_like_float(tok) && float_ctx && tok.rfind("0x", 0) != 0) {
                // Allow "2" in float context only when written as "2.0".
                throw ParseError(c.line_no, c.col(),
                                 "float literal required here (write '" + tok + ".0')");
            }
            errno = 0;
            char* end = nullptr;
            double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') {
                throw ParseError(c.line_no, c.col(), "bad number '" + tok + "'");
            }
            return Operand::make_imm(Value::of_f64(v));
        }
        errno = 0;
        char* end = nullptr;
        long long v = std::strtoll(tok.c_str(), &end, 0);
        if (errno != 0 || end == tok.c_str() || *end != '\0') {
            throw ParseError(c.line_no, c.col(), "bad integer '" + tok + "'");
        }
        return Operand::make_imm(Value::of_i64(v));
    }

    Operand parse_memref(Cursor& c) {
        c.expect('[', "in M[...]");
        Operand o;
        o.kind = Operand::Kind::mem;
        if (c.peek() == '%') {
            c.eat('%');
            o.mem.has_base_reg = true;
            o.mem.base_reg = intern_reg(c.ident());
            if (c.eat('+')) {
                o.mem.offset = parse_int(c, "offset");
            } else if (c.eat('-')) {
                o.mem.offset = -parse_int(c, "offset");
            }
        } else {
            o.mem.offset = parse_int(c, "cell index");
        }
        c.expect(']', "in M[...]");
        return o;
    }

    void parse_instruction(Cursor& c) {
        Instruction in;
        in.src_line = c.line_no;
        if (c.peek() == '%') {
            c.eat('%');
            std::string name = c.ident();
            c.expect('=', "after result register");
            in.result_reg = intern_reg(name);
        }
        std::string opname = c.ident();
        auto op = opcode_from_name(opname);
        if (!op) throw ParseError(c.line_no, c.col(), "unknown opcode '" + opname + "'");
        in.op = *op;
        bool float_ctx = is_float_arith(in.op) || is_fcmp(in.op) || in.op == Opcode::trunc_f2i;

        switch (in.op) {
        case Opcode::iadd: case Opcode::isub: case Opcode::imul: case Opcode::idiv:
        case Opcode::fadd: case Opcode::fsub: case Opcode::fmul: case Opcode::fdiv:
        case Opcode::icmp_lt: case Opcode::icmp_le: case Opcode::icmp_eq: case Opcode::icmp_ne:
        case Opcode::fcmp_lt: case Opcode::fcmp_le: case Opcode::fcmp_eq: case Opcode::fcmp_ne:
        case Opcode::shl: case Opcode::shr:
            require_result(in, c);
            in.operands.push_back(parse_operand(c, float_ctx));
            c.expect(',', "between operands");
            in.operands.push_back(parse_operand(c, float_ctx && !(in.op == Opcode::shl || in.op == Opcode::shr)));
            break;
        case Opcode::trunc_f2i:
        case Opcode::ext_i2f:
            require_result(in, c);
            in.operands.push_back(parse_operand(c, in.op == Opcode::trunc_f2i));
            break;
        case Opcode::load: {
            require_result(in, c);
            std::string m = c.ident();
            if (m != "M") throw ParseError(c.line_no, c.col(), "load expects M[...]");
            in.operands.push_back(parse_memref(c));
            break;
        }
        case Opcode::store: {
            forbid_result(in, c);
            std::string m = c.ident();
            if (m != "M") throw ParseError(c.line_no, c.col(), "store expects M[...]");
            in.operands.push_back(parse_memref(c));
            c.expect(',', "between operands");
            in.operands.push_back(parse_operand(c, false));
            break;
        }
        case Opcode::br:
            forbid_result(in, c);
            in.operands.push_back(parse_operand(c, false));
            mark_branch_slot(in, 0, c);
            break;
        case Opcode::br_cond:
            forbid_result(in, c);
            in.operands.push_back(parse_operand(c, false));
            if (in.operands[0].kind != Operand::Kind::reg &&
                in.operands[0].kind != Operand::Kind::imm) {
                throw ParseError(c.line_no, c.col(), "br_cond predicate must be a value");
            }
            c.expect(',', "between operands");
            in.operands.push_back(parse_operand(c, false));
            mark_branch_slot(in, 1, c);
            c.expect(',', "between operands");
            in.operands.push_back(parse_operand(c, false));
            mark_branch_slot(in, 2, c);
            break;
        case Opcode::call:
            forbid_result(in, c);
            in.operands.push_back(parse_operand(c, false));
            if (in.operands[0].kind != Operand::Kind::func) {
                throw ParseError(c.line_no, c.col(), "call expects @function");
            }
            break;
        case Opcode::ret:
        case Opcode::verify_check:
            forbid_result(in, c);
            break;
        case Opcode::print:
            forbid_result(in, c);
            in.operands.push_back(parse_operand(c, false));
            if (c.eat(',')) {
                int64_t d = parse_int(c, "digit budget");
                if (d < 1 || d > 17) {
                    throw ParseError(c.line_no, c.col(), "digit budget out of range [1,17]");
                }
                in.print_digits = static_cast<int>(d);
            }
            break;
        case Opcode::region_begin:
        case Opcode::region_end:
            forbid_result(in, c);
            in.region_id = static_cast<int32_t>(parse_int(c, "region id"));
            break;
        }
        append(in, c);
        end_of_line(c);
    }

    void mark_branch_slot(Instruction& in, size_t slot, Cursor& c) {
        if (in.operands[slot].kind != Operand::Kind::label) {
            throw ParseError(c.line_no, c.col(), "branch target must be a label");
        }
        // parse_operand recorded the pending entry with operand index 0;
        // fix it up to the actual slot.
        pending_branches_.back().operand = slot;
    }

    void require_result(const Instruction& in, Cursor& c) {
        if (!in.result_reg) {
            throw ParseError(c.line_no, c.col(),
                             std::string(opcode_name(in.op)) + " requires a result register");
        }
    }

    void forbid_result(const Instruction& in, Cursor& c) {
        if (in.result_reg) {
            throw ParseError(c.line_no, c.col(),
                             std::string(opcode_name(in.op)) + " does not produce a result");
        }
    }

    void append(Instruction in, Cursor& c) {
        if (cur_func_ < 0) {
            throw ParseError(c.line_no, c.col(), "instruction outside of a function");
        }
        if ((in.op == Opcode::region_begin || in.op == Opcode::region_end) && in.region_id < 0) {
            throw ParseError(c.line_no, c.col(), "region id must be non-negative");
        }
        cur().instrs.push_back(std::move(in));
    }

    void end_of_line(Cursor& c) {
        if (!c.done()) {
            throw ParseError(c.line_no, c.col(), "trailing tokens");
        }
    }

    void resolve() {
        for (const auto& pb : pending_branches_) {
            const auto& labels = func_labels_[pb.func];
            auto it = labels.find(pb.label);
            if (it == labels.end()) {
                throw ParseError(pb.line, 1, "undefined label '" + pb.label + "'");
            }
            prog_.functions[pb.func].instrs[pb.instr].operands[pb.operand].target = it->second;
        }
        for (const auto& pc : pending_calls_) {
            auto it = func_index_.find(pc.callee);
            if (it == func_index_.end()) {
                throw ParseError(pc.line, 1, "undefined function '" + pc.callee + "'");
            }
            prog_.functions[pc.func].instrs[pc.instr].operands[0].target = it->second;
        }
        auto entry = func_index_.find(entry_name_);
        if (entry == func_index_.end()) {
            throw ParseError(1, 1, "entry function '" + entry_name_ + "' not defined");
        }
        prog_.entry_index = entry->second;
        if (prog_.verify) {
            const auto& regs = func_regs_[prog_.entry_index];
            for (const auto& pv : pending_verify_regs_) {
                auto it = regs.find(pv.name);
                if (it == regs.end()) {
                    throw ParseError(pv.line, 1,
                                     "verify location %" + pv.name + " not defined in entry");
                }
                prog_.verify->outputs.push_back(Location::make_reg(it->second));
            }
            std::sort(prog_.verify->outputs.begin(), prog_.verify->outputs.end());
        }
    }

    void validate() {
        if (prog_.functions.empty()) throw ParseError(1, 1, "no functions defined");
        validate_regions();
        validate_def_before_use();
        validate_misc();
        validate_call_graph();
    }

    void validate_regions() {
        std::map<int32_t, int> begin_sites, end_sites;
        for (const auto& fn : prog_.functions) {
            std::vector<int32_t> stack;
            for (const auto& in : fn.instrs) {
                if (in.op == Opcode::region_begin) {
                    for (int32_t open : stack) {
                        if (open == in.region_id) {
                            throw ParseError(in.src_line, 1,
                                             "region " + std::to_string(in.region_id) +
                                                 " reopened while open");
                        }
                    }
                    stack.push_back(in.region_id);
                    begin_sites[in.region_id]++;
                } else if (in.op == Opcode::region_end) {
                    if (stack.empty() || stack.back() != in.region_id) {
                        throw ParseError(in.src_line, 1,
                                         "unbalanced region " + std::to_string(in.region_id));
                    }
                    stack.pop_back();
                    end_sites[in.region_id]++;
                }
            }
            if (!stack.empty()) {
                throw ParseError(fn.instrs.empty() ? 1 : fn.instrs.back().src_line, 1,
                                 "unbalanced region " + std::to_string(stack.back()));
            }
        }
        for (const auto& [id, n] : begin_sites) {
            if (n > 1 || end_sites[id] > 1) {
                throw ParseError(1, 1,
                                 "region " + std::to_string(id) + " marked at multiple sites");
            }
        }
        for (const auto& [id, n] : end_sites) {
            if (!begin_sites.count(id)) {
                throw ParseError(1, 1, "unbalanced region " + std::to_string(id));
            }
        }
    }

    // A register must have a textual definition above every textual use.
    // Conservative: control flow is ignored.
    void validate_def_before_use() {
        for (const auto& fn : prog_.functions) {
            std::unordered_set<uint32_t> defined;
            for (const auto& in : fn.instrs) {
                auto check = [&](uint32_t slot, uint32_t line) {
                    if (!defined.count(slot)) {
                        throw ParseError(line, 1,
                                         "use before def of " + prog_.reg_names[slot]);
                    }
                };
                for (const auto& op : in.operands) {
                    if (op.kind == Operand::Kind::reg) check(op.reg, in.src_line);
                    if (op.kind == Operand::Kind::mem && op.mem.has_base_reg) {
                        check(op.mem.base_reg, in.src_line);
                    }
                }
                if (in.result_reg) defined.insert(*in.result_reg);
            }
        }
    }

    void validate_misc() {
        for (const auto& fn : prog_.functions) {
            for (const auto& in : fn.instrs) {
                for (size_t k = 0; k < in.operands.size(); ++k) {
                    const auto kind = in.operands[k].kind;
                    bool label_slot = (in.op == Opcode::br && k == 0) ||
                                      (in.op == Opcode::br_cond && k >= 1);
                    if (kind == Operand::Kind::label && !label_slot) {
                        throw ParseError(in.src_line, 1,
                                         "label operand is only valid as a branch target");
                    }
                    if (kind == Operand::Kind::func && in.op != Opcode::call) {
                        throw ParseError(in.src_line, 1,
                                         "function operand is only valid for call");
                    }
                }
                if ((in.op == Opcode::shl || in.op == Opcode::shr) &&
                    in.operands[1].kind == Operand::Kind::imm) {
                    int64_t amt = in.operands[1].imm.i64();
                    if (amt < 0 || amt > 63) {
                        throw ParseError(in.src_line, 1, "shift amount out of [0,63]");
                    }
                }
                for (const auto& op : in.operands) {
                    if (op.kind == Operand::Kind::mem && !op.mem.has_base_reg) {
                        if (op.mem.offset < 0 ||
                            static_cast<uint64_t>(op.mem.offset) >= prog_.memory_size) {
                            throw ParseError(in.src_line, 1, "memory cell out of bounds");
                        }
                    }
                }
            }
        }
        if (prog_.verify) {
            for (const auto& loc : prog_.verify->outputs) {
                if (loc.kind == LocationKind::mem && loc.index >= prog_.memory_size) {
                    throw ParseError(1, 1, "verify memory cell out of bounds");
                }
            }
        }
    }

    void validate_call_graph() {
        size_t n = prog_.functions.size();
        std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
        std::vector<std::pair<size_t, uint32_t>> offending;
        auto dfs = [&](auto&& self, size_t f) -> void {
            state[f] = 1;
            for (const auto& in : prog_.functions[f].instrs) {
                if (in.op != Opcode::call) continue;
                size_t callee = in.operands[0].target;
                if (state[callee] == 1) {
                    throw ParseError(in.src_line, 1,
                                     "recursive call to @" + prog_.functions[callee].name);
                }
                if (state[callee] == 0) self(self, callee);
            }
            state[f] = 2;
        };
        for (size_t f = 0; f < n; ++f) {
            if (state[f] == 0) dfs(dfs, f);
        }
    }

    uint64_t compute_hash() const {
        uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const void* data, size_t len) {
            const auto* p = static_cast<const unsigned char*>(data);
            for (size_t i = 0; i < len; ++i) {
                h ^= p[i];
                h *= 1099511628211ull;
            }
        };
        auto mix_u64 = [&](uint64_t v) { mix(&v, 8); };
        auto mix_str = [&](const std::string& s) { mix(s.data(), s.size() + 1); };
        mix_u64(prog_.entry_index);
        mix_u64(prog_.memory_size);
        if (prog_.verify) {
            mix_u64(prog_.verify->outputs.size());
            for (const auto& loc : prog_.verify->outputs) {
                mix_u64(static_cast<uint64_t>(loc.kind));
                mix_u64(loc.index);
            }
            mix_u64(static_cast<uint64_t>(prog_.verify->rel_tol * 1e18));
        }
        for (const auto& fn : prog_.functions) {
            mix_str(fn.name);
            for (const auto& in : fn.instrs) {
                mix_u64(static_cast<uint64_t>(in.op));
                mix_u64(in.src_line);
                mix_u64(static_cast<uint64_t>(in.region_id));
                mix_u64(static_cast<uint64_t>(in.print_digits));
                mix_u64(in.result_reg ? *in.result_reg + 1 : 0);
                for (const auto& op : in.operands) {
                    mix_u64(static_cast<uint64_t>(op.kind));
                    switch (op.kind) {
                    case Operand::Kind::reg: mix_u64(op.reg); break;
                    case Operand::Kind::mem:
                        mix_u64(op.mem.has_base_reg ? op.mem.base_reg + 1 : 0);
                        mix_u64(static_cast<uint64_t>(op.mem.offset));
                        break;
                    case Operand::Kind::imm:
                        mix_u64(static_cast<uint64_t>(op.imm.tag()));
                        mix_u64(op.imm.bits());
                        break;
                    case Operand::Kind::label:
                    case Operand::Kind::func:
                        mix_u64(op.target);
                        break;
                    }
                }
            }
        }
        return h;
    }
};

} // namespace

Program parse_program(std::string_view text) {
    return Parser(text).run();
}

} // namespace fliptrace
