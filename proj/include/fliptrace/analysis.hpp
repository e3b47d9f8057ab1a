#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fliptrace/acl.hpp"
#include "fliptrace/campaign.hpp"
#include "fliptrace/dddg.hpp"
#include "fliptrace/interp.hpp"
#include "fliptrace/patterns.hpp"

namespace fliptrace {

struct AnalysisConfig {
    uint64_t budget = 10'000'000;
    std::optional<double> verify_tol;
    DetectorConfig detectors;
    StructuralConfig structural;
    int jobs = 1;  // parallelism for per-region classification
};

struct RegionReport {
    CodeRegionInstance instance;
    RegionInterface interface;
    ResilienceVerdict verdict;
};

/// Everything cmd_analyze reports for one injected fault.
struct AnalysisReport {
    uint64_t program_hash = 0;
    FaultSpec fault;
    Manifestation manifestation = Manifestation::verification_success;
    RunStatus faulty_status = RunStatus::completed;
    std::string trap_reason;
    bool value_compare_degraded = false;

    Trace golden_trace;
    Trace faulty_trace;
    std::optional<uint64_t> divergence_start;
    std::optional<uint64_t> reconvergence;

    AclTable acl;
    std::vector<DropPoint> drop_points;
    std::vector<RegionReport> regions;
    std::vector<PatternInstance> patterns;
};

/// Runs the full differential pipeline for one fault: golden + faulty runs,
/// alignment, per-region interfaces and verdicts, ACL table, drop points,
/// and pattern instances. Throws std::runtime_error when the golden run
/// itself fails.
AnalysisReport run_analysis(const Program& program, const InputMap& input,
                            const FaultSpec& fault, const AnalysisConfig& config = {});

} // namespace fliptrace
