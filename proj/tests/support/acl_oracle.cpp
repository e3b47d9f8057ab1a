#include "support/acl_oracle.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace fliptrace::testing {

namespace {

struct Alignment {
    std::optional<uint64_t> control_divergence;
    std::optional<uint64_t> reconvergence;  // faulty index
    int64_t offset = 0;

    bool aligned(uint64_t i) const {
        if (!control_divergence || i < *control_divergence) return true;
        return reconvergence && i >= *reconvergence;
    }
    uint64_t golden(uint64_t i) const {
        if (!control_divergence || i < *control_divergence) return i;
        return static_cast<uint64_t>(static_cast<int64_t>(i) + offset);
    }
};

Alignment compute_alignment(const Trace& g, const Trace& f) {
    Alignment al;
    al.offset = static_cast<int64_t>(g.size()) - static_cast<int64_t>(f.size());
    uint64_t min_len = std::min(g.size(), f.size());
    auto same = [&](uint64_t gi, uint64_t fi) {
        return g.events[gi].op == f.events[fi].op &&
               g.events[gi].src_line == f.events[fi].src_line;
    };
    for (uint64_t i = 0; i < min_len; ++i) {
        if (!same(i, i)) {
            al.control_divergence = i;
            break;
        }
    }
    if (!al.control_divergence && g.size() != f.size()) al.control_divergence = min_len;
    if (!al.control_divergence) return al;
    uint64_t cd = *al.control_divergence;
    uint64_t max_suffix = min_len - std::min(min_len, cd);
    uint64_t s = 0;
    while (s < max_suffix && same(g.size() - 1 - s, f.size() - 1 - s)) ++s;
    if (s > 0) al.reconvergence = f.size() - s;
    return al;
}

uint64_t table_end(const Trace& t) {
    uint64_t first_print = t.size();
    for (const auto& ev : t.events) {
        if (ev.op == Opcode::verify_check) return ev.index;
        if (ev.op == Opcode::print && first_print == t.size()) first_print = ev.index;
    }
    return first_print;
}

} // namespace

AclTable brute_force_acl(const TracePair& pair) {
    const Trace& golden = *pair.golden;
    const Trace& faulty = *pair.faulty;
    AclTable table;
    table.trace_length = faulty.size();
    table.n_end = table_end(faulty);
    table.counts.assign(table.n_end, 0);
    Alignment al = compute_alignment(golden, faulty);
    table.value_compare_degraded =
        al.control_divergence && *al.control_divergence < faulty.size();
    if (!pair.fault) return table;
    const FaultSpec& fault = *pair.fault;
    table.fault_index = fault.instr_index;

    // Replay: corrupted set after each event (location -> interval start),
    // plus the indices at which a clean write removed a corrupted location.
    std::vector<std::map<Location, uint64_t>> corrupted_after(faulty.size());
    std::map<Location, uint64_t> cur;
    std::map<std::pair<uint64_t, uint64_t>, std::set<uint64_t>> clean_removals;
    std::map<Location, std::vector<std::pair<uint64_t, uint64_t>>> spans;
    auto loc_key = [](const Location& l) {
        return std::make_pair(static_cast<uint64_t>(l.kind), l.index);
    };

    for (uint64_t i = fault.instr_index; i < faulty.size(); ++i) {
        const TraceEvent& ev = faulty.events[i];
        bool operand_tainted = false;
        for (const auto& loc : ev.operand_locs) {
            if (cur.count(loc)) operand_tainted = true;
        }
        if (i == fault.instr_index && !fault.target_result &&
            fault.operand_slot < ev.operand_locs.size()) {
            const Location& loc = ev.operand_locs[fault.operand_slot];
            cur[loc] = i;
            spans[loc].emplace_back(i, faulty.size());
            operand_tainted = true;
        }
        if (ev.result_loc) {
            bool corrupt;
            if (al.aligned(i)) {
                const TraceEvent& gev = golden.events[al.golden(i)];
                if (gev.result_loc && *gev.result_loc == *ev.result_loc) {
                    corrupt = *gev.result_value != *ev.result_value;
                } else {
                    corrupt = true;
                }
            } else {
                corrupt = operand_tainted;
            }
            if (i == fault.instr_index && fault.target_result) corrupt = true;
            const Location& loc = *ev.result_loc;
            if (corrupt) {
                if (cur.count(loc) && !spans[loc].empty()) {
                    spans[loc].back().second = i;
                }
                cur[loc] = i;
                spans[loc].emplace_back(i, faulty.size());
            } else if (cur.count(loc)) {
                cur.erase(loc);
                clean_removals[loc_key(loc)].insert(i);
                if (!spans[loc].empty() && spans[loc].back().second == faulty.size()) {
                    spans[loc].back().second = i;
                    if (spans[loc].back().first == i) spans[loc].pop_back();
                }
            }
        }
        corrupted_after[i] = cur;
    }

    // Per-index aliveness by forward scan.
    auto alive_scan = [&](const Location& loc, uint64_t i) {
        for (uint64_t j = i + 1; j < faulty.size(); ++j) {
            const TraceEvent& ev = faulty.events[j];
            for (const auto& ol : ev.operand_locs) {
                if (ol == loc) return true;
            }
            if (ev.result_loc && *ev.result_loc == loc) return false;
        }
        return false;
    };

    std::map<Location, std::vector<uint8_t>> bits;
    for (uint64_t i = fault.instr_index; i < faulty.size(); ++i) {
        for (const auto& [loc, start] : corrupted_after[i]) {
            auto& row = bits[loc];
            if (row.empty()) row.assign(faulty.size(), 0);
            if (start == i || alive_scan(loc, i)) row[i] = 1;
        }
    }

    for (auto& [loc, row] : bits) {
        std::vector<std::pair<uint64_t, uint64_t>> runs;
        for (uint64_t i = 0; i < row.size(); ++i) {
            if (!row[i]) continue;
            uint64_t j = i;
            while (j < row.size() && row[j]) ++j;
            if (i < table.n_end) runs.emplace_back(i, std::min(j, table.n_end));
            // Deaths: the first zero after a run, when inside the table.
            if (j < table.n_end) {
                AclDeath death;
                death.loc = loc;
                death.index = j;
                auto it = clean_removals.find(loc_key(loc));
                death.cause = (it != clean_removals.end() && it->second.count(j))
                                  ? DeathCause::clean_overwrite
                                  : DeathCause::disuse;
                table.deaths.push_back(death);
            }
            i = j;
        }
        if (!runs.empty()) table.rows[loc] = std::move(runs);
    }
    for (const auto& [loc, runs] : table.rows) {
        (void)loc;
        for (const auto& [s, e] : runs) {
            for (uint64_t i = s; i < e; ++i) table.counts[i]++;
        }
    }
    std::sort(table.deaths.begin(), table.deaths.end(),
              [](const AclDeath& a, const AclDeath& b) {
                  if (a.index != b.index) return a.index < b.index;
                  return a.loc < b.loc;
              });
    for (auto& [loc, sp] : spans) {
        if (sp.empty()) continue;
        std::sort(sp.begin(), sp.end());
        table.corrupted_spans[loc] = sp;
    }
    return table;
}

bool tables_equal(const AclTable& a, const AclTable& b, std::string* diff) {
    std::ostringstream why;
    auto fail = [&](const std::string& msg) {
        if (diff) *diff = msg;
        return false;
    };
    if (a.n_end != b.n_end) return fail("n_end differs");
    if (a.counts != b.counts) {
        for (size_t i = 0; i < std::min(a.counts.size(), b.counts.size()); ++i) {
            if (a.counts[i] != b.counts[i]) {
                why << "counts differ at " << i << ": " << a.counts[i] << " vs "
                    << b.counts[i];
                return fail(why.str());
            }
        }
        return fail("counts length differs");
    }
    if (a.rows.size() != b.rows.size()) return fail("row sets differ in size");
    for (const auto& [loc, runs] : a.rows) {
        auto it = b.rows.find(loc);
        if (it == b.rows.end()) return fail("row missing in second table");
        if (it->second != runs) {
            why << "runs differ for a location: ";
            for (auto [s, e] : runs) why << "[" << s << "," << e << ") ";
            why << "vs ";
            for (auto [s, e] : it->second) why << "[" << s << "," << e << ") ";
            return fail(why.str());
        }
    }
    if (a.deaths.size() != b.deaths.size()) {
        why << "death counts differ: " << a.deaths.size() << " vs " << b.deaths.size();
        return fail(why.str());
    }
    for (size_t i = 0; i < a.deaths.size(); ++i) {
        if (!(a.deaths[i].loc == b.deaths[i].loc) ||
            a.deaths[i].index != b.deaths[i].index ||
            a.deaths[i].cause != b.deaths[i].cause) {
            why << "death " << i << " differs (index " << a.deaths[i].index << " vs "
                << b.deaths[i].index << ")";
            return fail(why.str());
        }
    }
    return true;
}

} // namespace fliptrace::testing
