#include "fliptrace/analysis.hpp"

#include <algorithm>

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fliptrace {

AnalysisReport run_analysis(const Program& program, const InputMap& input,
                            const FaultSpec& fault, const AnalysisConfig& config) {
    AnalysisReport report;
    report.program_hash = program.hash;
    report.fault = fault;

    ExecOptions gopts;
    gopts.budget = config.budget;
    gopts.verify_tol = config.verify_tol;
    RunOutcome golden = execute(program, input, std::nullopt, gopts);
    if (golden.status != RunStatus::completed) {
        throw std::runtime_error("golden run did not complete: " +
                                 (golden.status == RunStatus::hung ? std::string("hung")
                                                                   : golden.trap_reason));
    }
    if (fault.instr_index >= golden.trace.size()) {
        throw std::invalid_argument("fault index beyond fault-free trace length");
    }

    ExecOptions fopts = gopts;
    fopts.expected_outputs = &golden.outputs;
    RunOutcome faulty = execute(program, input, fault, fopts);
    report.faulty_status = faulty.status;
    report.trap_reason = faulty.trap_reason;
    report.manifestation = classify_outcome(program, golden, faulty);

    report.golden_trace = std::move(golden.trace);
    report.faulty_trace = std::move(faulty.trace);

    TracePair pair = align_pair(report.golden_trace, report.faulty_trace, fault);
    report.divergence_start = pair.divergence_start;
    report.reconvergence = pair.reconvergence;

    report.acl = build_acl(pair);
    report.value_compare_degraded = report.acl.value_compare_degraded;
    report.drop_points = find_drop_points(report.acl, report.faulty_trace);

    auto regions = split_regions(report.faulty_trace);
    report.regions.resize(regions.size());
    int jobs = std::max(1, config.jobs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
#endif
    for (long long k = 0; k < static_cast<long long>(regions.size()); ++k) {
        RegionReport rr;
        rr.instance = regions[static_cast<size_t>(k)];
        rr.interface = classify_interface(report.faulty_trace, rr.instance);
        rr.verdict = classify_region(pair, rr.instance, rr.interface);
        report.regions[static_cast<size_t>(k)] = std::move(rr);
    }

    report.patterns = detect_patterns(pair, report.acl, regions, config.detectors);
    return report;
}

} // namespace fliptrace
