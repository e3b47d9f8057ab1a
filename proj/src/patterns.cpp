#include "fliptrace/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fliptrace/interp.hpp"

namespace fliptrace {

namespace {

double numeric(const Value& v) {
    return v.is_int() ? static_cast<double>(v.i64()) : v.f64();
}

/// Forward state reconstruction: values of all locations after a prefix of
/// the trace. advance_to(i) applies writes from events [pos, i).
class StateWalker {
public:
    explicit StateWalker(const Trace& trace) : trace_(trace) {}

    void advance_to(uint64_t end_exclusive) {
        for (; pos_ < end_exclusive && pos_ < trace_.size(); ++pos_) {
            const TraceEvent& ev = trace_.events[pos_];
            // First reads of a location expose its pre-trace value.
            for (size_t k = 0; k < ev.operand_locs.size(); ++k) {
                state_.emplace(ev.operand_locs[k], ev.operand_values[k]);
            }
            if (ev.result_loc) state_[*ev.result_loc] = *ev.result_value;
        }
    }

    std::optional<Value> value(const Location& loc) const {
        auto it = state_.find(loc);
        if (it == state_.end()) return std::nullopt;
        return it->second;
    }

private:
    const Trace& trace_;
    uint64_t pos_ = 0;
    std::unordered_map<Location, Value, LocationHash> state_;
};

/// The region instance that owns an index under innermost attribution.
const CodeRegionInstance* owner_of(const std::vector<CodeRegionInstance>& regions,
                                   uint64_t index) {
    const CodeRegionInstance* best = nullptr;
    for (const auto& inst : regions) {
        if (!inst.contains(index)) continue;
        if (!best || inst.length() < best->length()) best = &inst;
    }
    return best;
}

void attribute(PatternInstance& pi, const std::vector<CodeRegionInstance>& regions) {
    if (pi.anchor_indices.empty()) return;
    if (const CodeRegionInstance* inst = owner_of(regions, pi.anchor_indices.front())) {
        pi.region_id = inst->region_id;
        pi.instance_ordinal = inst->ordinal;
    }
}

void collect_lines(PatternInstance& pi, const Trace& trace) {
    for (uint64_t i : pi.anchor_indices) {
        uint32_t line = trace.events[i].src_line;
        if (std::find(pi.src_lines.begin(), pi.src_lines.end(), line) == pi.src_lines.end()) {
            pi.src_lines.push_back(line);
        }
    }
}

bool golden_event(const TracePair& pair, uint64_t i, const TraceEvent** out) {
    if (!pair.aligned_at(i)) return false;
    uint64_t g = pair.golden_index(i);
    if (g >= pair.golden->size()) return false;
    *out = &pair.golden->events[g];
    return true;
}

} // namespace

double error_magnitude(Value correct, Value incorrect) {
    if (correct == incorrect) return 0.0;
    double c = numeric(correct);
    double i = numeric(incorrect);
    if (std::isnan(c) || std::isnan(i)) return std::numeric_limits<double>::infinity();
    if (c == i) return 0.0;  // e.g. +0.0 vs -0.0
    if (c == 0.0) return std::numeric_limits<double>::infinity();
    return std::fabs(c - i) / std::max(std::fabs(c), 1.0);
}

const char* pattern_name(PatternKind k) {
    switch (k) {
    case PatternKind::conditional_statement: return "conditional_statement";
    case PatternKind::shifting: return "shifting";
    case PatternKind::truncation: return "truncation";
    case PatternKind::dcl: return "dead_corrupted_locations";
    case PatternKind::repeated_additions: return "repeated_additions";
    case PatternKind::overwriting: return "overwriting";
    }
    return "?";
}

ResilienceVerdict classify_region(const TracePair& pair, const CodeRegionInstance& instance,
                                  const RegionInterface& interface) {
    ResilienceVerdict verdict;
    uint64_t entry = instance.first;
    uint64_t exit = instance.last + 1;
    if (!pair.aligned_at(instance.first) || !pair.aligned_at(instance.last)) {
        verdict.boundary_unaligned = true;
        return verdict;
    }

    StateWalker faulty(*pair.faulty);
    StateWalker golden(*pair.golden);

    auto compare_at = [&](const std::set<Location>& locs, uint64_t f_end, uint64_t g_end,
                          std::vector<Location>& corrupted,
                          std::map<Location, double>* magnitudes) {
        faulty.advance_to(f_end);
        golden.advance_to(g_end);
        for (const auto& loc : locs) {
            auto fv = faulty.value(loc);
            auto gv = golden.value(loc);
            // Locations untouched so far hold their shared initial value.
            if (!fv || !gv) {
                if (magnitudes) (*magnitudes)[loc] = 0.0;
                continue;
            }
            if (*fv != *gv) corrupted.push_back(loc);
            if (magnitudes) (*magnitudes)[loc] = error_magnitude(*gv, *fv);
        }
    };

    std::set<Location> boundary = interface.inputs;
    boundary.insert(interface.outputs.begin(), interface.outputs.end());

    std::map<Location, double> before;
    std::vector<Location> corrupted_entry;
    compare_at(boundary, entry, pair.golden_index(instance.first), corrupted_entry, &before);

    std::map<Location, double> after;
    std::vector<Location> corrupted_exit;
    compare_at(boundary, exit, pair.golden_index(instance.last) + 1, corrupted_exit, &after);

    for (const auto& loc : corrupted_entry) {
        if (interface.inputs.count(loc)) verdict.corrupted_inputs.push_back(loc);
    }
    for (const auto& loc : corrupted_exit) {
        if (interface.outputs.count(loc)) verdict.corrupted_outputs.push_back(loc);
    }

    if (verdict.corrupted_inputs.empty()) return verdict;

    if (verdict.corrupted_outputs.empty()) {
        verdict.kind = ResilienceCase::case1;
        return verdict;
    }

    for (const auto& loc : boundary) {
        double b = before.count(loc) ? before[loc] : 0.0;
        double a = after.count(loc) ? after[loc] : 0.0;
        if (b > 0 && a < b) {
            verdict.magnitude_evidence.push_back({loc, b, a});
        }
    }
    if (!verdict.magnitude_evidence.empty()) verdict.kind = ResilienceCase::case2;
    return verdict;
}

std::vector<DropPoint> find_drop_points(const AclTable& table, const Trace& faulty) {
    std::vector<DropPoint> out;
    for (uint64_t i = 1; i < table.counts.size(); ++i) {
        if (table.counts[i] >= table.counts[i - 1]) continue;
        DropPoint dp;
        dp.index = i;
        dp.src_line = i < faulty.size() ? faulty.events[i].src_line : 0;
        for (const auto& death : table.deaths) {
            if (death.index == i) dp.dying.push_back(death);
        }
        out.push_back(std::move(dp));
    }
    return out;
}

namespace {

/// Union-find over add/mul events; two events share a chain when one
/// consumes the other's result while it is still current.
class ChainIndex {
public:
    explicit ChainIndex(const Trace& trace) {
        std::unordered_map<Location, uint64_t, LocationHash> producer;
        for (uint64_t i = 0; i < trace.size(); ++i) {
            const TraceEvent& ev = trace.events[i];
            if (!ev.result_loc) continue;
            if (!is_add_or_mul(ev.op)) {
                producer.erase(*ev.result_loc);
                continue;
            }
            parent_.emplace(i, i);
            for (size_t k = 0; k < ev.operand_locs.size(); ++k) {
                auto it = producer.find(ev.operand_locs[k]);
                if (it != producer.end()) {
                    merge(i, it->second);
                    consumed_.insert({it->second, ev.operand_locs[k]});
                }
            }
            producer[*ev.result_loc] = i;
        }
    }

    bool is_chain_event(uint64_t i) const { return parent_.count(i) != 0; }

    uint64_t root(uint64_t i) const {
        uint64_t r = i;
        while (parent_.at(r) != r) r = parent_.at(r);
        return r;
    }

    /// Event indices of the chain containing event i, in trace order.
    std::vector<uint64_t> members(uint64_t i) const {
        uint64_t r = root(i);
        std::vector<uint64_t> out;
        for (const auto& [e, p] : parent_) {
            (void)p;
            if (root(e) == r) out.push_back(e);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    bool result_consumed(uint64_t producer_event, const Location& loc) const {
        return consumed_.count({producer_event, loc}) != 0;
    }

private:
    void merge(uint64_t a, uint64_t b) {
        uint64_t ra = root(a), rb = root(b);
        if (ra != rb) parent_[ra] = rb;
    }

    std::map<uint64_t, uint64_t> parent_;
    std::set<std::pair<uint64_t, Location>> consumed_;
};

void detect_dcl(const TracePair& pair, const AclTable& table,
                const std::vector<CodeRegionInstance>& regions,
                std::vector<PatternInstance>& out) {
    const Trace& faulty = *pair.faulty;
    ChainIndex chains(faulty);

    // Disuse deaths per index, restricted to strict count decreases.
    std::unordered_map<uint64_t, uint32_t> disuse_at;
    for (const auto& d : table.deaths) {
        if (d.cause == DeathCause::disuse) disuse_at[d.index]++;
    }
    std::set<uint64_t> emitted_roots;
    for (uint64_t i = 1; i < table.counts.size(); ++i) {
        if (table.counts[i] >= table.counts[i - 1]) continue;
        auto it = disuse_at.find(i);
        // The aggregation signature: several corrupted locations consumed
        // for the last time by one add/mul of a chain.
        if (it == disuse_at.end() || it->second < 2) continue;
        if (!chains.is_chain_event(i)) continue;
        uint64_t root = chains.root(i);
        if (emitted_roots.count(root)) continue;
        auto members = chains.members(i);

        std::set<Location> distinct_operands;
        for (uint64_t e : members) {
            for (const auto& loc : faulty.events[e].operand_locs) {
                distinct_operands.insert(loc);
            }
        }
        if (distinct_operands.size() < 2) continue;

        uint64_t last = members.back();
        int corrupted_terminals = 0;
        for (uint64_t e : members) {
            const auto& res = faulty.events[e].result_loc;
            if (!res || chains.result_consumed(e, *res)) continue;
            if (table.corrupted_at(*res, last)) corrupted_terminals++;
        }
        if (corrupted_terminals > 1) continue;

        PatternInstance pi;
        pi.kind = PatternKind::dcl;
        size_t dying = 0;
        for (uint64_t e : members) {
            auto dit = disuse_at.find(e);
            if (dit != disuse_at.end() && e >= 1 && e < table.counts.size() &&
                table.counts[e] < table.counts[e - 1]) {
                pi.anchor_indices.push_back(e);
                dying += dit->second;
            }
        }
        pi.evidence = EvidenceKind::drop_point;
        pi.evidence_index = i;
        pi.note = std::to_string(dying) + " corrupted locations die in an aggregation, " +
                  std::to_string(corrupted_terminals) + " corrupted result left";
        attribute(pi, regions);
        collect_lines(pi, faulty);
        emitted_roots.insert(root);
        out.push_back(std::move(pi));
    }
}

void detect_repeated_additions(const TracePair& pair, const AclTable& table,
                               const std::vector<CodeRegionInstance>& regions,
                               const DetectorConfig& config,
                               std::vector<PatternInstance>& out) {
    const Trace& faulty = *pair.faulty;
    // Add-lineage provenance: for each location, the set of (origin location,
    // version, passed-through-an-add) its current value derives from via
    // adds and copies only.
    struct Origin {
        Location loc;
        uint64_t version;
        bool through_add;
        bool operator<(const Origin& o) const {
            if (loc != o.loc) return loc < o.loc;
            if (version != o.version) return version < o.version;
            return through_add < o.through_add;
        }
    };
    constexpr size_t kMaxOrigins = 16;
    std::unordered_map<Location, uint64_t, LocationHash> version;
    std::unordered_map<Location, std::set<Origin>, LocationHash> prov;
    // Self-accumulating update runs per location.
    std::unordered_map<Location, std::vector<uint64_t>, LocationHash> runs;
    std::map<Location, std::vector<std::vector<uint64_t>>> finished;

    auto flush = [&](const Location& loc) {
        auto it = runs.find(loc);
        if (it != runs.end() && !it->second.empty()) {
            finished[loc].push_back(std::move(it->second));
            it->second.clear();
        }
    };

    for (uint64_t i = 0; i < faulty.size(); ++i) {
        const TraceEvent& ev = faulty.events[i];
        if (!ev.result_loc) continue;
        const Location& res = *ev.result_loc;
        bool copy_like = ev.op == Opcode::load || ev.op == Opcode::store;
        bool add_like = is_add(ev.op);
        std::set<Origin> next;
        bool self_add = false;
        if (copy_like || add_like) {
            for (size_t k = 0; k < ev.operand_locs.size(); ++k) {
                if (ev.operand_is_address(k)) continue;
                const Location& src = ev.operand_locs[k];
                uint64_t src_ver = version.count(src) ? version[src] : 0;
                next.insert({src, src_ver, add_like});
                auto pit = prov.find(src);
                if (pit != prov.end()) {
                    for (const Origin& o : pit->second) {
                        next.insert({o.loc, o.version, o.through_add || add_like});
                    }
                }
            }
            uint64_t res_ver = version.count(res) ? version[res] : 0;
            for (const Origin& o : next) {
                if (o.loc == res && o.version == res_ver && o.through_add) {
                    self_add = true;
                    break;
                }
            }
            if (next.size() > kMaxOrigins) next.clear();
        }
        if (self_add) {
            runs[res].push_back(i);
        } else {
            flush(res);
        }
        version[res] = version.count(res) ? version[res] + 1 : 1;
        prov[res] = std::move(next);
    }
    for (auto& [loc, run] : runs) {
        (void)run;
        flush(loc);
    }

    for (const auto& [loc, loc_runs] : finished) {
        for (const auto& run : loc_runs) {
            if (run.size() < config.repeated_add_min_updates) continue;
            // Magnitudes after each update, against the aligned golden write.
            std::vector<double> mags;
            std::vector<uint64_t> usable;
            for (uint64_t e : run) {
                const TraceEvent* gev = nullptr;
                if (!golden_event(pair, e, &gev) || !gev->result_value ||
                    !faulty.events[e].result_value) {
                    continue;
                }
                mags.push_back(error_magnitude(*gev->result_value,
                                               *faulty.events[e].result_value));
                usable.push_back(e);
            }
            // Strictly decreasing positive magnitudes across >= 2
            // consecutive update pairs.
            size_t best_start = 0, best_len = 0, cur = 1;
            for (size_t k = 1; k < mags.size(); ++k) {
                if (mags[k - 1] > mags[k] && mags[k - 1] > 0) {
                    ++cur;
                } else {
                    cur = 1;
                }
                if (cur > best_len) {
                    best_len = cur;
                    best_start = k + 1 - cur;
                }
            }
            if (best_len < 3) continue;
            if (!table.corrupted_at(loc, usable[best_start])) continue;
            PatternInstance pi;
            pi.kind = PatternKind::repeated_additions;
            pi.anchor_indices.assign(usable.begin() + static_cast<long>(best_start),
                                     usable.begin() + static_cast<long>(best_start + best_len));
            pi.evidence = EvidenceKind::magnitude_decrease;
            pi.evidence_index = usable[best_start + 1];
            pi.note = "error magnitude shrinks over " + std::to_string(best_len) +
                      " self-accumulating updates of " + faulty.location_name(loc);
            attribute(pi, regions);
            collect_lines(pi, faulty);
            out.push_back(std::move(pi));
        }
    }
}

void detect_conditional(const TracePair& pair, const AclTable& table,
                        const std::vector<CodeRegionInstance>& regions,
                        std::vector<PatternInstance>& out) {
    const Trace& faulty = *pair.faulty;
    std::unordered_map<Location, uint64_t, LocationHash> last_writer;
    for (uint64_t i = 0; i < faulty.size(); ++i) {
        const TraceEvent& ev = faulty.events[i];
        if (ev.op == Opcode::br_cond && !ev.operand_locs.empty()) {
            auto it = last_writer.find(ev.operand_locs[0]);
            if (it != last_writer.end()) {
                const TraceEvent& cmp = faulty.events[it->second];
                if (is_icmp(cmp.op) || is_fcmp(cmp.op)) {
                    bool corrupted_operand = false;
                    for (const auto& loc : cmp.operand_locs) {
                        if (table.corrupted_at(loc, cmp.index)) corrupted_operand = true;
                    }
                    const TraceEvent* gcmp = nullptr;
                    if (corrupted_operand && golden_event(pair, cmp.index, &gcmp) &&
                        gcmp->result_value && cmp.result_value &&
                        *gcmp->result_value == *cmp.result_value) {
                        PatternInstance pi;
                        pi.kind = PatternKind::conditional_statement;
                        pi.anchor_indices = {cmp.index, i};
                        pi.evidence = EvidenceKind::magnitude_decrease;
                        pi.evidence_index = cmp.index;
                        pi.note = "corrupted compare operand, predicate unchanged";
                        attribute(pi, regions);
                        collect_lines(pi, faulty);
                        out.push_back(std::move(pi));
                    }
                }
            }
        }
        if (ev.result_loc) last_writer[*ev.result_loc] = i;
    }
}

void detect_shifting(const TracePair& pair, const AclTable& table,
                     const std::vector<CodeRegionInstance>& regions,
                     std::vector<PatternInstance>& out) {
    const Trace& faulty = *pair.faulty;
    for (uint64_t i = 0; i < faulty.size(); ++i) {
        const TraceEvent& ev = faulty.events[i];
        if (ev.op != Opcode::shl && ev.op != Opcode::shr) continue;
        if (ev.operand_locs.empty()) continue;
        // Slot 0 is the shifted value when it is location-backed.
        if (!table.corrupted_at(ev.operand_locs[0], i)) continue;
        const TraceEvent* gev = nullptr;
        if (!golden_event(pair, i, &gev) || !gev->result_value || !ev.result_value) continue;
        if (*gev->result_value != *ev.result_value) continue;
        PatternInstance pi;
        pi.kind = PatternKind::shifting;
        pi.anchor_indices = {i};
        pi.evidence = EvidenceKind::magnitude_decrease;
        pi.evidence_index = i;
        pi.note = "corrupted bits shifted out; result matches fault-free value";
        attribute(pi, regions);
        collect_lines(pi, faulty);
        out.push_back(std::move(pi));
    }
}

void detect_truncation(const TracePair& pair, const AclTable& table,
                       const std::vector<CodeRegionInstance>& regions,
                       std::vector<PatternInstance>& out) {
    const Trace& faulty = *pair.faulty;
    for (uint64_t i = 0; i < faulty.size(); ++i) {
        const TraceEvent& ev = faulty.events[i];
        bool masked = false;
        if (ev.op == Opcode::trunc_f2i) {
            if (ev.operand_locs.empty() || !table.corrupted_at(ev.operand_locs[0], i)) continue;
            const TraceEvent* gev = nullptr;
            if (!golden_event(pair, i, &gev) || !gev->result_value || !ev.result_value) continue;
            masked = *gev->result_value == *ev.result_value;
        } else if (ev.op == Opcode::print) {
            if (ev.operand_locs.empty() || !table.corrupted_at(ev.operand_locs[0], i)) continue;
            const TraceEvent* gev = nullptr;
            if (!golden_event(pair, i, &gev) || gev->operand_values.empty()) continue;
            // Formatting with a digit budget discards the corrupted tail.
            int digits = ev.print_digits;
            if (digits <= 0) continue;
            masked = format_print_value(gev->operand_values[0], digits) ==
                     format_print_value(ev.operand_values[0], digits);
        } else {
            continue;
        }
        if (!masked) continue;
        PatternInstance pi;
        pi.kind = PatternKind::truncation;
        pi.anchor_indices = {i};
        pi.evidence = EvidenceKind::magnitude_decrease;
        pi.evidence_index = i;
        pi.note = ev.op == Opcode::trunc_f2i
                      ? "corrupted fraction discarded by conversion"
                      : "corrupted digits beyond the printed precision";
        attribute(pi, regions);
        collect_lines(pi, faulty);
        out.push_back(std::move(pi));
    }
}

void detect_overwriting(const TracePair& pair, const AclTable& table,
                        const std::vector<CodeRegionInstance>& regions,
                        std::vector<PatternInstance>& out) {
    const Trace& faulty = *pair.faulty;
    for (const auto& death : table.deaths) {
        if (death.cause != DeathCause::clean_overwrite) continue;
        PatternInstance pi;
        pi.kind = PatternKind::overwriting;
        pi.anchor_indices = {death.index};
        pi.evidence = EvidenceKind::drop_point;
        pi.evidence_index = death.index;
        pi.note = "corrupted " + faulty.location_name(death.loc) +
                  " overwritten by a fault-free value";
        attribute(pi, regions);
        collect_lines(pi, faulty);
        out.push_back(std::move(pi));
    }
}

} // namespace

std::vector<PatternInstance> detect_patterns(const TracePair& pair, const AclTable& table,
                                             const std::vector<CodeRegionInstance>& regions,
                                             const DetectorConfig& config) {
    std::vector<PatternInstance> out;
    detect_dcl(pair, table, regions, out);
    detect_repeated_additions(pair, table, regions, config, out);
    detect_conditional(pair, table, regions, out);
    detect_shifting(pair, table, regions, out);
    detect_truncation(pair, table, regions, out);
    detect_overwriting(pair, table, regions, out);
    std::sort(out.begin(), out.end(), [](const PatternInstance& a, const PatternInstance& b) {
        uint64_t ai = a.anchor_indices.empty() ? 0 : a.anchor_indices.front();
        uint64_t bi = b.anchor_indices.empty() ? 0 : b.anchor_indices.front();
        if (ai != bi) return ai < bi;
        return a.kind < b.kind;
    });
    return out;
}

FeatureVector feature_vector(const Trace& trace, const std::vector<PatternInstance>& instances) {
    FeatureVector fv;
    fv.total_dynamic_instructions = trace.size();
    if (fv.total_dynamic_instructions == 0) {
        throw std::invalid_argument("feature_vector: empty trace");
    }
    std::array<uint64_t, kPatternCount> counts{};
    for (const auto& pi : instances) counts[static_cast<size_t>(pi.kind)]++;
    for (size_t k = 0; k < kPatternCount; ++k) {
        fv.rates[k] = static_cast<double>(counts[k]) /
                      static_cast<double>(fv.total_dynamic_instructions);
    }
    return fv;
}

FeatureVector structural_features(const Trace& trace, const StructuralConfig& config) {
    FeatureVector fv;
    fv.total_dynamic_instructions = trace.size();
    if (fv.total_dynamic_instructions == 0) {
        throw std::invalid_argument("structural_features: empty trace");
    }
    uint64_t n = trace.size();

    uint64_t cond = 0, shift = 0, trunc = 0, overwrite = 0, repeat_add = 0;

    // Compares whose first later use is a conditional branch.
    std::unordered_map<Location, uint64_t, LocationHash> pending_cmp;
    std::unordered_set<Location, LocationHash> accessed;
    for (const auto& ev : trace.events) {
        for (const auto& loc : ev.operand_locs) {
            auto it = pending_cmp.find(loc);
            if (it != pending_cmp.end()) {
                if (ev.op == Opcode::br_cond) ++cond;
                pending_cmp.erase(it);
            }
        }
        if (ev.op == Opcode::shl || ev.op == Opcode::shr) ++shift;
        if (ev.op == Opcode::trunc_f2i) ++trunc;
        if (ev.op == Opcode::print && ev.print_digits > 0) ++trunc;
        if (ev.result_loc) {
            if (accessed.count(*ev.result_loc)) ++overwrite;
            pending_cmp.erase(*ev.result_loc);
            if (is_icmp(ev.op) || is_fcmp(ev.op)) pending_cmp[*ev.result_loc] = ev.index;
        }
        for (const auto& loc : ev.operand_locs) accessed.insert(loc);
        if (ev.result_loc) accessed.insert(*ev.result_loc);
    }

    // Self-accumulating add runs, counted structurally (no magnitudes).
    {
        std::unordered_map<Location, uint64_t, LocationHash> version;
        struct Origin {
            Location loc;
            uint64_t ver;
            bool add;
            bool operator<(const Origin& o) const {
                if (loc != o.loc) return loc < o.loc;
                if (ver != o.ver) return ver < o.ver;
                return add < o.add;
            }
        };
        std::unordered_map<Location, std::set<Origin>, LocationHash> prov;
        std::unordered_map<Location, uint32_t, LocationHash> run_len;
        constexpr size_t kMaxOrigins = 16;
        auto close_run = [&](const Location& loc) {
            auto it = run_len.find(loc);
            if (it != run_len.end()) {
                if (it->second >= config.repeated_add_min_updates) ++repeat_add;
                run_len.erase(it);
            }
        };
        for (const auto& ev : trace.events) {
            if (!ev.result_loc) continue;
            const Location& res = *ev.result_loc;
            bool copy_like = ev.op == Opcode::load || ev.op == Opcode::store;
            bool add_like = is_add(ev.op);
            std::set<Origin> next;
            bool self_add = false;
            if (copy_like || add_like) {
                for (size_t k = 0; k < ev.operand_locs.size(); ++k) {
                    if (ev.operand_is_address(k)) continue;
                    const Location& src = ev.operand_locs[k];
                    uint64_t src_ver = version.count(src) ? version[src] : 0;
                    next.insert({src, src_ver, add_like});
                    auto pit = prov.find(src);
                    if (pit != prov.end()) {
                        for (const Origin& o : pit->second) {
                            next.insert({o.loc, o.ver, o.add || add_like});
                        }
                    }
                }
                uint64_t res_ver = version.count(res) ? version[res] : 0;
                for (const Origin& o : next) {
                    if (o.loc == res && o.ver == res_ver && o.add) {
                        self_add = true;
                        break;
                    }
                }
                if (next.size() > kMaxOrigins) next.clear();
            }
            if (self_add) {
                run_len[res]++;
            } else {
                close_run(res);
            }
            version[res] = version.count(res) ? version[res] + 1 : 1;
            prov[res] = std::move(next);
        }
        std::vector<Location> open;
        for (const auto& [loc, len] : run_len) {
            (void)len;
            open.push_back(loc);
        }
        for (const auto& loc : open) close_run(loc);
    }

    // Dead-location rate: chunked by the main-loop region's instances.
    double dead_rate = 0.0;
    {
        auto regions = split_regions(trace);
        std::optional<int32_t> chunk_region = config.chunk_region;
        if (!chunk_region) {
            std::map<int32_t, uint32_t> top_counts;
            for (const auto& inst : regions) {
                if (!inst.synthetic && inst.parent_region_id < 0) {
                    top_counts[inst.region_id]++;
                }
            }
            uint32_t best = 0;
            for (const auto& [id, cnt] : top_counts) {
                if (cnt > best) {
                    best = cnt;
                    chunk_region = id;
                }
            }
        }
        std::vector<const CodeRegionInstance*> chunks;
        for (const auto& inst : regions) {
            if (chunk_region && inst.region_id == *chunk_region) chunks.push_back(&inst);
        }
        // Last read index of every location.
        std::unordered_map<Location, uint64_t, LocationHash> last_read;
        for (const auto& ev : trace.events) {
            for (const auto& loc : ev.operand_locs) last_read[loc] = ev.index;
        }
        if (chunks.empty()) {
            // Whole trace as one chunk.
            std::unordered_set<Location, LocationHash> locs;
            for (const auto& ev : trace.events) {
                for (const auto& loc : ev.operand_locs) locs.insert(loc);
                if (ev.result_loc) locs.insert(*ev.result_loc);
            }
            uint64_t dead = 0;
            for (const auto& loc : locs) {
                if (!last_read.count(loc)) ++dead;
            }
            dead_rate = locs.empty() ? 0.0
                                     : static_cast<double>(dead) /
                                           static_cast<double>(locs.size());
        } else {
            double sum = 0.0;
            for (const auto* chunk : chunks) {
                std::unordered_set<Location, LocationHash> locs;
                for (uint64_t i = chunk->first; i <= chunk->last && i < n; ++i) {
                    const TraceEvent& ev = trace.events[i];
                    for (const auto& loc : ev.operand_locs) locs.insert(loc);
                    if (ev.result_loc) locs.insert(*ev.result_loc);
                }
                uint64_t dead = 0;
                for (const auto& loc : locs) {
                    auto it = last_read.find(loc);
                    if (it == last_read.end() || it->second <= chunk->last) ++dead;
                }
                if (!locs.empty()) {
                    sum += static_cast<double>(dead) / static_cast<double>(locs.size());
                }
            }
            dead_rate = sum / static_cast<double>(chunks.size());
        }
    }

    double dn = static_cast<double>(n);
    fv.rates[static_cast<size_t>(PatternKind::conditional_statement)] = double(cond) / dn;
    fv.rates[static_cast<size_t>(PatternKind::shifting)] = double(shift) / dn;
    fv.rates[static_cast<size_t>(PatternKind::truncation)] = double(trunc) / dn;
    fv.rates[static_cast<size_t>(PatternKind::dcl)] = dead_rate;
    fv.rates[static_cast<size_t>(PatternKind::repeated_additions)] = double(repeat_add) / dn;
    fv.rates[static_cast<size_t>(PatternKind::overwriting)] = double(overwrite) / dn;
    return fv;
}

} // namespace fliptrace
