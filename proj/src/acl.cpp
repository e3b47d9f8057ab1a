#include "fliptrace/acl.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_map>

namespace fliptrace {

namespace {

struct Interval {
    uint64_t start;
    // end: index of the closing write, or trace length when never rewritten.
    uint64_t end;
    enum class Close : uint8_t { none, retaint, clean } close = Close::none;
};

/// First output-phase instruction: verify_check if present, else the first
/// print; the table ends there.
uint64_t output_phase_start(const Trace& t) {
    uint64_t first_print = t.size();
    for (const auto& ev : t.events) {
        if (ev.op == Opcode::verify_check) return ev.index;
        if (ev.op == Opcode::print && first_print == t.size()) first_print = ev.index;
    }
    return first_print;
}

} // namespace

bool AclTable::bit(const Location& loc, uint64_t i) const {
    auto it = rows.find(loc);
    if (it == rows.end()) return false;
    for (const auto& [s, e] : it->second) {
        if (i >= s && i < e) return true;
    }
    return false;
}

bool AclTable::corrupted_at(const Location& loc, uint64_t i) const {
    auto it = corrupted_spans.find(loc);
    if (it == corrupted_spans.end()) return false;
    for (const auto& [s, e] : it->second) {
        if (i >= s && i < e) return true;
    }
    return false;
}

std::vector<uint8_t> AclTable::row_bits(const Location& loc) const {
    std::vector<uint8_t> out(n_end, 0);
    auto it = rows.find(loc);
    if (it == rows.end()) return out;
    for (const auto& [s, e] : it->second) {
        for (uint64_t i = s; i < e && i < n_end; ++i) out[i] = 1;
    }
    return out;
}

AclTable build_acl(const TracePair& pair) {
    const Trace& faulty = *pair.faulty;
    const Trace& golden = *pair.golden;

    AclTable table;
    table.trace_length = faulty.size();
    table.n_end = output_phase_start(faulty);
    table.counts.assign(table.n_end, 0);
    // A trapped run is a pure prefix (truncated, not degraded); degradation
    // means the retired events themselves left the golden control path.
    table.value_compare_degraded =
        pair.control_divergence && *pair.control_divergence < faulty.size();
    if (!pair.fault) return table;
    table.fault_index = pair.fault->instr_index;

    // Forward pass: corruption intervals per location plus every read index.
    std::unordered_map<Location, std::vector<Interval>, LocationHash> intervals;
    std::unordered_map<Location, std::vector<uint64_t>, LocationHash> reads;
    std::unordered_map<Location, size_t, LocationHash> open;  // loc -> interval idx

    auto open_interval = [&](const Location& loc, uint64_t i) {
        auto it = open.find(loc);
        if (it != open.end()) {
            Interval& iv = intervals[loc][it->second];
            if (iv.start == i) return;  // injected and rewritten at one event
            iv.end = i;
            iv.close = Interval::Close::retaint;
        }
        intervals[loc].push_back({i, faulty.size(), Interval::Close::none});
        open[loc] = intervals[loc].size() - 1;
    };

    auto close_clean = [&](const Location& loc, uint64_t i) {
        auto it = open.find(loc);
        if (it == open.end()) return;
        Interval& iv = intervals[loc][it->second];
        if (iv.start == i) {
            // Flipped and cleanly rewritten within one event: the corrupted
            // value never survived an instruction boundary.
            intervals[loc].pop_back();
            open.erase(it);
            return;
        }
        iv.end = i;
        iv.close = Interval::Close::clean;
        open.erase(it);
    };

    for (uint64_t i = pair.fault->instr_index; i < faulty.size(); ++i) {
        const TraceEvent& ev = faulty.events[i];
        bool operand_tainted = false;
        for (const auto& loc : ev.operand_locs) {
            reads[loc].push_back(i);
            if (open.count(loc)) operand_tainted = true;
        }
        if (i == pair.fault->instr_index && !pair.fault->target_result) {
            uint32_t slot = pair.fault->operand_slot;
            if (slot < ev.operand_locs.size()) {
                open_interval(ev.operand_locs[slot], i);
                operand_tainted = true;
            }
        }
        if (!ev.result_loc) continue;

        bool corrupted_write;
        if (pair.aligned_at(i)) {
            const TraceEvent& gev = golden.events[pair.golden_index(i)];
            if (gev.result_loc && *gev.result_loc == *ev.result_loc) {
                corrupted_write = *gev.result_value != *ev.result_value;
            } else {
                // Same instruction wrote somewhere else (corrupted address):
                // the faulty-written location holds a value the fault-free
                // run never produced there.
                corrupted_write = true;
            }
        } else {
            corrupted_write = operand_tainted;
        }
        if (i == pair.fault->instr_index && pair.fault->target_result) {
            corrupted_write = true;
        }

        if (corrupted_write) {
            open_interval(*ev.result_loc, i);
        } else {
            close_clean(*ev.result_loc, i);
        }
    }

    // Derive bit runs and deaths from the intervals.
    std::map<Location, std::vector<std::pair<uint64_t, uint64_t>>> raw_rows;
    for (auto& [loc, ivs] : intervals) {
        auto& spans = table.corrupted_spans[loc];
        const auto& rs = reads[loc];
        for (const Interval& iv : ivs) {
            spans.emplace_back(iv.start, iv.end);
            // Last read of this interval's value, in (start, end].
            auto lo = std::upper_bound(rs.begin(), rs.end(), iv.start);
            auto hi = std::upper_bound(rs.begin(), rs.end(), iv.end);
            std::optional<uint64_t> r_last;
            if (lo != hi) r_last = *(hi - 1);

            uint64_t run_end;
            std::optional<DeathCause> cause;
            if (r_last && *r_last == iv.end && iv.close != Interval::Close::none) {
                // Used by the very instruction that rewrites it.
                run_end = iv.end;
                cause = iv.close == Interval::Close::clean
                            ? std::optional<DeathCause>(DeathCause::clean_overwrite)
                            : std::nullopt;  // retaint: row continues
            } else if (r_last) {
                run_end = *r_last;
                cause = DeathCause::disuse;
            } else {
                run_end = iv.start + 1;
                if (iv.close != Interval::Close::none && iv.end == iv.start + 1) {
                    cause = iv.close == Interval::Close::clean
                                ? std::optional<DeathCause>(DeathCause::clean_overwrite)
                                : std::nullopt;
                } else {
                    cause = DeathCause::disuse;
                }
            }
            raw_rows[loc].emplace_back(iv.start, run_end);
            if (cause && run_end < table.n_end) {
                table.deaths.push_back({loc, run_end, *cause});
            }
        }
        std::sort(spans.begin(), spans.end());
    }

    // Clamp to [0, n_end), merge adjacent runs, drop empty rows.
    for (auto& [loc, runs] : raw_rows) {
        std::sort(runs.begin(), runs.end());
        std::vector<std::pair<uint64_t, uint64_t>> merged;
        for (auto [s, e] : runs) {
            e = std::min(e, table.n_end);
            if (s >= e) continue;
            if (!merged.empty() && merged.back().second >= s) {
                merged.back().second = std::max(merged.back().second, e);
            } else {
                merged.emplace_back(s, e);
            }
        }
        if (!merged.empty()) table.rows[loc] = std::move(merged);
    }

    for (const auto& [loc, runs] : table.rows) {
        for (const auto& [s, e] : runs) {
            for (uint64_t i = s; i < e; ++i) table.counts[i]++;
        }
    }
    std::sort(table.deaths.begin(), table.deaths.end(),
              [](const AclDeath& a, const AclDeath& b) {
                  if (a.index != b.index) return a.index < b.index;
                  return a.loc < b.loc;
              });
    return table;
}

std::vector<uint32_t> acl_counts(const AclTable& table) {
    return table.counts;
}

void acl_to_csv(const AclTable& table, const Trace& faulty, std::ostream& out) {
    out << "location";
    for (uint64_t i = 0; i < table.n_end; ++i) out << "," << i;
    out << "\n";
    for (const auto& [loc, runs] : table.rows) {
        out << faulty.location_name(loc);
        auto bits = table.row_bits(loc);
        for (uint64_t i = 0; i < table.n_end; ++i) out << "," << int(bits[i]);
        out << "\n";
    }
    out << "counts";
    for (uint64_t i = 0; i < table.n_end; ++i) out << "," << table.counts[i];
    out << "\n";
}

} // namespace fliptrace
