#include "fliptrace/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fliptrace/dddg.hpp"

namespace fliptrace {

namespace {

/// Deterministic, platform-independent RNG: splitmix64 stream.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Unbiased draw from [0, bound) via rejection.
    uint64_t bounded(uint64_t bound) {
        uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

private:
    uint64_t state_;
};

bool outputs_bit_identical(const RunOutcome& a, const RunOutcome& b) {
    if (a.outputs != b.outputs) return false;
    if (a.prints.size() != b.prints.size()) return false;
    for (size_t i = 0; i < a.prints.size(); ++i) {
        if (a.prints[i].formatted != b.prints[i].formatted) return false;
    }
    return true;
}

} // namespace

double z_for_confidence(double confidence) {
    if (confidence == 0.95) return 1.960;
    if (confidence == 0.99) return 2.576;
    throw std::invalid_argument("no built-in z for this confidence level; pass custom z");
}

SamplePlan sample_size(std::optional<uint64_t> population, double confidence, double margin,
                       double p, std::optional<double> custom_z) {
    if (margin <= 0 || margin >= 1) throw std::invalid_argument("margin must be in (0,1)");
    if (p <= 0 || p >= 1) throw std::invalid_argument("p must be in (0,1)");
    if (population && *population == 0) throw std::invalid_argument("population is empty");
    SamplePlan plan;
    plan.confidence = confidence;
    plan.z = custom_z ? *custom_z : z_for_confidence(confidence);
    plan.margin = margin;
    plan.p = p;
    double zz = plan.z * plan.z * p * (1 - p);
    if (!population) {
        plan.infinite_population = true;
        plan.n = static_cast<uint64_t>(std::ceil(zz / (margin * margin)));
    } else {
        plan.infinite_population = false;
        plan.population_size = *population;
        double nd = static_cast<double>(*population);
        double n = nd / (1.0 + margin * margin * (nd - 1.0) / zz);
        plan.n = static_cast<uint64_t>(std::ceil(n));
        plan.n = std::min(plan.n, *population);
    }
    return plan;
}

const char* manifestation_name(Manifestation m) {
    switch (m) {
    case Manifestation::verification_success: return "verification_success";
    case Manifestation::verification_failed: return "verification_failed";
    case Manifestation::crashed: return "crashed";
    }
    return "?";
}

std::vector<FaultSite> enumerate_target_slots(const Trace& golden, TargetScope scope) {
    std::vector<FaultSite> sites;
    uint64_t first = 0;
    uint64_t last = golden.size() == 0 ? 0 : golden.size() - 1;
    std::set<Location> region_inputs, region_internals;
    bool restrict_locs = false;

    if (scope.kind == ScopeKind::region_instance) {
        auto regions = split_regions(golden);
        const CodeRegionInstance* found = nullptr;
        for (const auto& inst : regions) {
            if (inst.region_id == scope.region_id && inst.ordinal == scope.ordinal) {
                found = &inst;
                break;
            }
        }
        if (!found) {
            throw EmptyPopulation("region instance not found in golden trace");
        }
        first = found->first;
        last = found->last;
        auto interface = classify_interface(golden, *found);
        region_inputs = interface.inputs;
        region_internals = interface.internals;
        restrict_locs = true;
    }

    bool want_inputs = scope.locs != ScopeLocs::internals;
    bool want_internals = scope.locs != ScopeLocs::inputs;

    std::unordered_set<Location, LocationHash> seen_locs;
    std::unordered_set<Location, LocationHash> written;
    for (uint64_t i = first; i <= last && i < golden.size(); ++i) {
        const TraceEvent& ev = golden.events[i];
        if (want_inputs) {
            for (uint32_t k = 0; k < ev.operand_locs.size(); ++k) {
                const Location& loc = ev.operand_locs[k];
                // First read of a location not yet written in scope: an
                // externally defined value entering the computation.
                if (written.count(loc) || seen_locs.count(loc)) continue;
                seen_locs.insert(loc);
                if (restrict_locs && !region_inputs.count(loc)) continue;
                sites.push_back({i, false, k, 0});
            }
        }
        if (ev.result_loc) {
            if (want_internals) {
                bool eligible = !restrict_locs || region_internals.count(*ev.result_loc);
                if (eligible) sites.push_back({i, true, 0, 0});
            }
            written.insert(*ev.result_loc);
            seen_locs.insert(*ev.result_loc);
        }
    }
    if (sites.empty()) throw EmptyPopulation("fault site population is empty");
    return sites;
}

RunOutcome golden_run(const Program& program, const InputMap& input, uint64_t budget) {
    ExecOptions opts;
    opts.budget = budget;
    opts.record_trace = true;
    RunOutcome out = execute(program, input, std::nullopt, opts);
    if (out.status != RunStatus::completed) {
        throw std::runtime_error("golden run did not complete: " +
                                 (out.status == RunStatus::hung ? std::string("hung")
                                                                : out.trap_reason));
    }
    return out;
}

Manifestation classify_outcome(const Program& program, const RunOutcome& golden,
                               const RunOutcome& faulty) {
    if (faulty.status != RunStatus::completed) return Manifestation::crashed;
    if (program.verify) {
        return faulty.verify == VerifyOutcome::passed ? Manifestation::verification_success
                                                      : Manifestation::verification_failed;
    }
    return outputs_bit_identical(faulty, golden) ? Manifestation::verification_success
                                                 : Manifestation::verification_failed;
}

Manifestation classify_injection(const Program& program, const InputMap& input,
                                 const RunOutcome& golden, const FaultSpec& fault,
                                 uint64_t budget) {
    ExecOptions opts;
    opts.budget = budget;
    opts.record_trace = false;
    opts.expected_outputs = &golden.outputs;
    RunOutcome out = execute(program, input, fault, opts);
    return classify_outcome(program, golden, out);
}

namespace {

CampaignResult run_sites(const Program& program, const InputMap& input,
                         const RunOutcome& golden, std::vector<FaultSite> sites,
                         uint64_t population, const CampaignOptions& opts) {
    CampaignResult result;
    result.population = population;
    result.tests = sites.size();
    std::vector<Manifestation> outcomes(sites.size());

    int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        for (size_t i = 0; i < sites.size(); ++i) {
            outcomes[i] = classify_injection(program, input, golden, sites[i].to_fault(),
                                             opts.budget);
        }
    } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(jobs)
        for (long long i = 0; i < static_cast<long long>(sites.size()); ++i) {
            outcomes[static_cast<size_t>(i)] = classify_injection(
                program, input, golden, sites[static_cast<size_t>(i)].to_fault(), opts.budget);
        }
#else
        for (size_t i = 0; i < sites.size(); ++i) {
            outcomes[i] = classify_injection(program, input, golden, sites[i].to_fault(),
                                             opts.budget);
        }
#endif
    }

    for (size_t i = 0; i < sites.size(); ++i) {
        switch (outcomes[i]) {
        case Manifestation::verification_success: result.tally_success++; break;
        case Manifestation::verification_failed: result.tally_failed++; break;
        case Manifestation::crashed: result.tally_crashed++; break;
        }
        if (opts.keep_log) result.log.push_back({sites[i], outcomes[i]});
    }
    result.success_rate = result.tests == 0
                              ? 0.0
                              : static_cast<double>(result.tally_success) /
                                    static_cast<double>(result.tests);
    return result;
}

} // namespace

CampaignResult run_campaign(const Program& program, const InputMap& input,
                            const SamplePlan& plan, TargetScope scope, uint64_t seed,
                            const CampaignOptions& opts) {
    if (plan.n < 1) throw std::invalid_argument("sample plan has no tests");
    RunOutcome golden = golden_run(program, input, opts.budget);
    std::vector<FaultSite> slots = enumerate_target_slots(golden.trace, scope);
    uint64_t population = slots.size() * 64;

    Rng rng(seed);
    std::vector<FaultSite> picks;
    picks.reserve(plan.n);
    bool with_replacement = population < plan.n;
    if (with_replacement) {
        for (uint64_t k = 0; k < plan.n; ++k) {
            uint64_t site = rng.bounded(population);
            FaultSite fs = slots[site / 64];
            fs.bit = static_cast<uint32_t>(site % 64);
            picks.push_back(fs);
        }
    } else {
        // Sparse Fisher-Yates over the site index space.
        std::unordered_map<uint64_t, uint64_t> swapped;
        for (uint64_t k = 0; k < plan.n; ++k) {
            uint64_t j = k + rng.bounded(population - k);
            uint64_t vj = swapped.count(j) ? swapped[j] : j;
            uint64_t vk = swapped.count(k) ? swapped[k] : k;
            swapped[j] = vk;
            FaultSite fs = slots[vj / 64];
            fs.bit = static_cast<uint32_t>(vj % 64);
            picks.push_back(fs);
        }
    }
    // Deterministic site order for the log, independent of draw order.
    std::sort(picks.begin(), picks.end(), [](const FaultSite& a, const FaultSite& b) {
        if (a.index != b.index) return a.index < b.index;
        if (a.result != b.result) return a.result < b.result;
        if (a.slot != b.slot) return a.slot < b.slot;
        return a.bit < b.bit;
    });

    CampaignResult result = run_sites(program, input, golden, std::move(picks), population, opts);
    result.seed = seed;
    result.with_replacement = with_replacement;
    return result;
}

CampaignResult run_exhaustive(const Program& program, const InputMap& input,
                              TargetScope scope, const CampaignOptions& opts) {
    RunOutcome golden = golden_run(program, input, opts.budget);
    std::vector<FaultSite> slots = enumerate_target_slots(golden.trace, scope);
    std::vector<FaultSite> sites;
    sites.reserve(slots.size() * 64);
    for (const FaultSite& s : slots) {
        for (uint32_t bit = 0; bit < 64; ++bit) {
            FaultSite fs = s;
            fs.bit = bit;
            sites.push_back(fs);
        }
    }
    uint64_t population = sites.size();
    return run_sites(program, input, golden, std::move(sites), population, opts);
}

} // namespace fliptrace
