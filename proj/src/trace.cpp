#include "fliptrace/trace.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fliptrace {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'R', 'C'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    uint8_t u8() {
        int c = in_.get();
        if (c == EOF) throw TraceFormatError("truncated stream");
        return static_cast<uint8_t>(c);
    }
    uint16_t u16() { return static_cast<uint16_t>(u8() | (uint16_t{u8()} << 8)); }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t{u8()} << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t{u8()} << (8 * i);
        return v;
    }
    std::string bytes(size_t n) {
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n) throw TraceFormatError("truncated stream");
        return s;
    }

private:
    std::istream& in_;
};

void encode_location(std::string& out, const Location& loc) {
    out.push_back(static_cast<char>(loc.kind));
    put_u64(out, loc.index);
}

Location decode_location(Reader& r) {
    Location loc;
    uint8_t kind = r.u8();
    if (kind > 1) throw TraceFormatError("malformed record: bad location kind");
    loc.kind = static_cast<LocationKind>(kind);
    loc.index = r.u64();
    return loc;
}

void encode_value(std::string& out, const Value& v) {
    out.push_back(static_cast<char>(v.tag()));
    put_u64(out, v.bits());
}

Value decode_value(Reader& r) {
    uint8_t tag = r.u8();
    if (tag > 1) throw TraceFormatError("malformed record: bad value tag");
    return Value::from_bits(static_cast<ValueTag>(tag), r.u64());
}

} // namespace

std::string Trace::location_name(const Location& loc) const {
    if (loc.kind == LocationKind::mem) return "M[" + std::to_string(loc.index) + "]";
    if (loc.index < reg_names.size()) return reg_names[loc.index];
    return "%r" + std::to_string(loc.index);
}

void write_trace(const Trace& trace, std::ostream& out) {
    std::string header;
    header.append(kMagic, 4);
    put_u16(header, kVersion);
    put_u16(header, 0);
    put_u64(header, trace.program_hash);
    put_u32(header, static_cast<uint32_t>(trace.reg_names.size()));
    for (const auto& name : trace.reg_names) {
        put_u16(header, static_cast<uint16_t>(name.size()));
        header.append(name);
    }
    put_u64(header, trace.events.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::string rec;
    for (const auto& ev : trace.events) {
        rec.clear();
        put_u64(rec, ev.index);
        rec.push_back(static_cast<char>(ev.op));
        put_u32(rec, ev.src_line);
        put_u32(rec, static_cast<uint32_t>(ev.region_id));
        rec.push_back(static_cast<char>(ev.operand_locs.size()));
        for (size_t i = 0; i < ev.operand_locs.size(); ++i) {
            encode_location(rec, ev.operand_locs[i]);
            encode_value(rec, ev.operand_values[i]);
        }
        rec.push_back(static_cast<char>(ev.const_operands.size()));
        for (const auto& cv : ev.const_operands) encode_value(rec, cv);
        rec.push_back(static_cast<char>(ev.address_mask));
        rec.push_back(static_cast<char>(ev.print_digits));
        rec.push_back(ev.result_loc ? 1 : 0);
        if (ev.result_loc) {
            encode_location(rec, *ev.result_loc);
            encode_value(rec, *ev.result_value);
        }
        std::string framed;
        put_u32(framed, static_cast<uint32_t>(rec.size()));
        out.write(framed.data(), 4);
        out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
    if (!out) throw TraceFormatError("write failed");
}

Trace read_trace(std::istream& in) {
    Reader r(in);
    std::string magic = r.bytes(4);
    if (magic != std::string(kMagic, 4)) throw TraceFormatError("not a trace file");
    uint16_t version = r.u16();
    if (version != kVersion) {
        throw TraceFormatError("unsupported trace version " + std::to_string(version));
    }
    r.u16();  // flags
    Trace trace;
    trace.program_hash = r.u64();
    uint32_t n_names = r.u32();
    trace.reg_names.reserve(n_names);
    for (uint32_t i = 0; i < n_names; ++i) {
        uint16_t len = r.u16();
        trace.reg_names.push_back(r.bytes(len));
    }
    uint64_t n_events = r.u64();
    trace.events.reserve(n_events);
    for (uint64_t i = 0; i < n_events; ++i) {
        uint32_t rec_len = r.u32();
        std::string payload = r.bytes(rec_len);
        std::istringstream ps(payload);
        Reader pr(ps);
        TraceEvent ev;
        try {
            ev.index = pr.u64();
            ev.op = static_cast<Opcode>(pr.u8());
            if (ev.op > Opcode::verify_check) throw TraceFormatError("malformed record: bad opcode");
            ev.src_line = pr.u32();
            ev.region_id = static_cast<int32_t>(pr.u32());
            uint8_t n_ops = pr.u8();
            for (uint8_t k = 0; k < n_ops; ++k) {
                ev.operand_locs.push_back(decode_location(pr));
                ev.operand_values.push_back(decode_value(pr));
            }
            uint8_t n_consts = pr.u8();
            for (uint8_t k = 0; k < n_consts; ++k) {
                ev.const_operands.push_back(decode_value(pr));
            }
            ev.address_mask = pr.u8();
            ev.print_digits = pr.u8();
            uint8_t has_result = pr.u8();
            if (has_result > 1) throw TraceFormatError("malformed record: bad result flag");
            if (has_result) {
                ev.result_loc = decode_location(pr);
                ev.result_value = decode_value(pr);
            }
        } catch (const TraceFormatError& e) {
            // A short payload means the declared arity disagrees with the
            // framed length.
            throw TraceFormatError(std::string("malformed record: ") + e.what());
        }
        if (static_cast<size_t>(ps.tellg()) != payload.size() && !ps.eof()) {
            throw TraceFormatError("malformed record: trailing bytes");
        }
        if (ev.index != i) throw TraceFormatError("malformed record: non-consecutive index");
        trace.events.push_back(std::move(ev));
    }
    return trace;
}

void write_trace_jsonl(const Trace& trace, std::ostream& out) {
    for (const auto& ev : trace.events) {
        nlohmann::json j;
        j["index"] = ev.index;
        j["op"] = opcode_name(ev.op);
        j["line"] = ev.src_line;
        if (ev.region_id >= 0) j["region"] = ev.region_id;
        auto loc_json = [&](const Location& loc) {
            nlohmann::json lj;
            lj["name"] = trace.location_name(loc);
            lj["kind"] = loc.kind == LocationKind::reg ? "reg" : "mem";
            lj["index"] = loc.index;
            return lj;
        };
        auto val_json = [](const Value& v) {
            nlohmann::json vj;
            vj["tag"] = v.is_int() ? "i64" : "f64";
            char buf[20];
            std::snprintf(buf, sizeof buf, "0x%016llx",
                          static_cast<unsigned long long>(v.bits()));
            vj["bits"] = buf;
            vj["repr"] = v.to_string();
            return vj;
        };
        nlohmann::json ops = nlohmann::json::array();
        for (size_t i = 0; i < ev.operand_locs.size(); ++i) {
            nlohmann::json o;
            o["loc"] = loc_json(ev.operand_locs[i]);
            o["value"] = val_json(ev.operand_values[i]);
            ops.push_back(std::move(o));
        }
        j["operands"] = std::move(ops);
        if (ev.result_loc) {
            j["result"]["loc"] = loc_json(*ev.result_loc);
            j["result"]["value"] = val_json(*ev.result_value);
        }
        out << j.dump() << "\n";
    }
}

std::vector<CodeRegionInstance> split_regions(const Trace& trace) {
    struct Open {
        int32_t region_id;
        uint64_t first;
    };
    std::vector<CodeRegionInstance> out;
    std::vector<Open> stack;
    std::map<int32_t, uint32_t> ordinals;
    // Synthetic ids are interned by the source line opening the gap so the
    // same static block keeps one id across instances and runs.
    std::map<uint32_t, int32_t> synthetic_ids;
    std::map<int32_t, uint32_t> synthetic_ordinals;
    std::optional<uint64_t> gap_start;

    auto close_gap = [&](uint64_t end_exclusive) {
        if (!gap_start) return;
        CodeRegionInstance inst;
        inst.synthetic = true;
        inst.first = *gap_start;
        inst.last = end_exclusive - 1;
        uint32_t key_line = trace.events[*gap_start].src_line;
        auto it = synthetic_ids.find(key_line);
        if (it == synthetic_ids.end()) {
            int32_t id = -1 - static_cast<int32_t>(synthetic_ids.size());
            it = synthetic_ids.emplace(key_line, id).first;
        }
        inst.region_id = it->second;
        inst.ordinal = synthetic_ordinals[inst.region_id]++;
        inst.parent_region_id = -1;
        out.push_back(inst);
        gap_start.reset();
    };

    for (uint64_t i = 0; i < trace.events.size(); ++i) {
        const TraceEvent& ev = trace.events[i];
        if (ev.op == Opcode::region_begin) {
            if (stack.empty()) close_gap(i);
            stack.push_back({ev.region_id, i});
        } else if (ev.op == Opcode::region_end) {
            if (stack.empty() || stack.back().region_id != ev.region_id) {
                throw TraceFormatError("unbalanced region markers in trace");
            }
            CodeRegionInstance inst;
            inst.region_id = ev.region_id;
            inst.first = stack.back().first;
            inst.last = i;
            inst.parent_region_id =
                stack.size() >= 2 ? stack[stack.size() - 2].region_id : -1;
            stack.pop_back();
            inst.ordinal = ordinals[inst.region_id]++;
            out.push_back(inst);
        } else if (stack.empty() && !gap_start) {
            gap_start = i;
        }
    }
    // A trapped or hung run can truncate the trace with regions still open;
    // close them at the final event.
    while (!stack.empty()) {
        CodeRegionInstance inst;
        inst.region_id = stack.back().region_id;
        inst.first = stack.back().first;
        inst.last = trace.events.empty() ? 0 : trace.events.size() - 1;
        inst.parent_region_id = stack.size() >= 2 ? stack[stack.size() - 2].region_id : -1;
        stack.pop_back();
        inst.ordinal = ordinals[inst.region_id]++;
        out.push_back(inst);
    }
    close_gap(trace.events.size());

    std::sort(out.begin(), out.end(), [](const CodeRegionInstance& a, const CodeRegionInstance& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.last > b.last;
    });
    return out;
}

std::vector<size_t> region_partition(const Trace& trace,
                                     const std::vector<CodeRegionInstance>& instances) {
    std::vector<size_t> owner(trace.events.size(), SIZE_MAX);
    // Instances are sorted outermost-first at equal starts, so assigning in
    // order leaves the innermost instance as the final owner.
    for (size_t k = 0; k < instances.size(); ++k) {
        for (uint64_t i = instances[k].first; i <= instances[k].last && i < owner.size(); ++i) {
            owner[i] = k;
        }
    }
    return owner;
}

bool TracePair::aligned_at(uint64_t i) const {
    if (!control_divergence || i < *control_divergence) return true;
    return reconvergence && i >= *reconvergence;
}

uint64_t TracePair::golden_index(uint64_t i) const {
    if (!control_divergence || i < *control_divergence) return i;
    return static_cast<uint64_t>(static_cast<int64_t>(i) + golden_offset);
}

TracePair align_pair(const Trace& golden, const Trace& faulty,
                     std::optional<FaultSpec> fault) {
    if (golden.program_hash != faulty.program_hash) {
        throw TraceFormatError("trace header mismatch: traces come from different programs");
    }
    TracePair pair;
    pair.golden = &golden;
    pair.faulty = &faulty;
    pair.fault = fault;
    pair.golden_offset = static_cast<int64_t>(golden.size()) - static_cast<int64_t>(faulty.size());

    uint64_t min_len = std::min(golden.size(), faulty.size());
    auto control_same = [&](uint64_t g, uint64_t f) {
        return golden.events[g].op == faulty.events[f].op &&
               golden.events[g].src_line == faulty.events[f].src_line;
    };
    auto event_equal = [&](const TraceEvent& a, const TraceEvent& b) {
        return a.op == b.op && a.src_line == b.src_line && a.region_id == b.region_id &&
               a.operand_locs == b.operand_locs && a.operand_values == b.operand_values &&
               a.const_operands == b.const_operands &&
               a.result_loc == b.result_loc && a.result_value == b.result_value;
    };

    for (uint64_t i = 0; i < min_len; ++i) {
        if (!control_same(i, i)) {
            pair.control_divergence = i;
            break;
        }
        if (!pair.divergence_start && !event_equal(golden.events[i], faulty.events[i])) {
            pair.divergence_start = i;
        }
    }
    if (!pair.control_divergence && golden.size() != faulty.size()) {
        pair.control_divergence = min_len;
    }
    if (!pair.divergence_start && pair.control_divergence) {
        pair.divergence_start = pair.control_divergence;
    }

    if (!pair.control_divergence) {
        if (pair.divergence_start) pair.reconvergence = *pair.divergence_start + 1;
        return pair;
    }

    // Longest common (opcode, src_line) suffix, clamped so it starts at or
    // after the control divergence in both traces.
    uint64_t cd = *pair.control_divergence;
    uint64_t max_suffix = min_len - std::min(min_len, cd);
    uint64_t s = 0;
    while (s < max_suffix &&
           control_same(golden.size() - 1 - s, faulty.size() - 1 - s)) {
        ++s;
    }
    if (s > 0) {
        pair.reconvergence = faulty.size() - s;
    }
    return pair;
}

} // namespace fliptrace
