#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fliptrace/interp.hpp"
#include "fliptrace/trace.hpp"

namespace fliptrace {

struct SamplePlan {
    bool infinite_population = true;
    uint64_t population_size = 0;
    double confidence = 0.95;
    double z = 1.960;
    double margin = 0.03;
    double p = 0.5;
    uint64_t n = 0;
};

/// z for the standard confidence levels; anything else must supply z directly.
double z_for_confidence(double confidence);

/// Statistical test count: n = ceil(z^2 p (1-p) / e^2) for an infinite
/// population, with the finite-population correction
/// n = ceil(N / (1 + e^2 (N-1) / (z^2 p (1-p)))) otherwise.
SamplePlan sample_size(std::optional<uint64_t> population, double confidence, double margin,
                       double p = 0.5, std::optional<double> custom_z = std::nullopt);

enum class ScopeKind : uint8_t { whole_program, region_instance };
enum class ScopeLocs : uint8_t { inputs, internals, both };

struct TargetScope {
    ScopeKind kind = ScopeKind::whole_program;
    int32_t region_id = 0;
    uint32_t ordinal = 0;  // dynamic instance of the region
    ScopeLocs locs = ScopeLocs::both;
};

/// A single-bit injection site: one value slot of one dynamic instruction
/// plus a bit position.
struct FaultSite {
    uint64_t index = 0;
    bool result = false;
    uint32_t slot = 0;
    uint32_t bit = 0;

    FaultSpec to_fault() const { return FaultSpec{index, result, slot, bit}; }
};

struct EmptyPopulation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Enumerates the injectable value slots in deterministic order, without the
/// 64-bit cross product (each returned slot stands for 64 bit sites).
/// Input slots are the first read of each externally defined location;
/// internal slots are the result writes (restricted to the region's internal
/// locations for region scope).
std::vector<FaultSite> enumerate_target_slots(const Trace& golden, TargetScope scope);

enum class Manifestation : uint8_t { verification_success, verification_failed, crashed };
const char* manifestation_name(Manifestation m);

struct FaultRecord {
    FaultSite site;
    Manifestation outcome;
};

struct CampaignResult {
    uint64_t tests = 0;
    uint64_t tally_success = 0;
    uint64_t tally_failed = 0;
    uint64_t tally_crashed = 0;
    double success_rate = 0.0;
    uint64_t seed = 0;
    uint64_t population = 0;  // site count (slots x 64 bits)
    bool with_replacement = false;
    std::vector<FaultRecord> log;  // deterministic site order
};

struct CampaignOptions {
    uint64_t budget = 10'000'000;
    int jobs = 1;       // OpenMP threads; 1 = serial reference path
    bool keep_log = true;
};

/// Runs plan.n single-bit injections drawn uniformly (without replacement
/// when the population allows it) over the scope's site population, executes
/// each, and classifies the manifestation:
///   crashed               <- trapped or hung;
///   verification success  <- completed and verify_check passed (or, with no
///                            verify phase, outputs bit-identical to golden);
///   verification failed   <- completed otherwise.
/// Identical (program, input, plan, scope, seed) give identical results
/// regardless of `jobs`.
CampaignResult run_campaign(const Program& program, const InputMap& input,
                            const SamplePlan& plan, TargetScope scope, uint64_t seed,
                            const CampaignOptions& opts = {});

/// Injects every site in the population exactly once.
CampaignResult run_exhaustive(const Program& program, const InputMap& input,
                              TargetScope scope, const CampaignOptions& opts = {});

/// The golden run all campaigns compare against; throws std::runtime_error
/// if it does not complete.
RunOutcome golden_run(const Program& program, const InputMap& input, uint64_t budget);

/// Classifies one injection against a completed golden outcome.
Manifestation classify_injection(const Program& program, const InputMap& input,
                                 const RunOutcome& golden, const FaultSpec& fault,
                                 uint64_t budget);

/// Classifies an already-executed faulty outcome against the golden one.
Manifestation classify_outcome(const Program& program, const RunOutcome& golden,
                               const RunOutcome& faulty);

} // namespace fliptrace
