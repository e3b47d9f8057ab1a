#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fliptrace/acl.hpp"
#include "fliptrace/dddg.hpp"
#include "fliptrace/trace.hpp"

namespace fliptrace {

/// Relative error of a faulty value against its fault-free counterpart,
/// with the denominator floored at 1 so sub-unit magnitudes reduce to the
/// absolute difference. Bit-equal values give 0; a nonzero value where the
/// correct one is exactly zero gives +infinity, as does any NaN.
double error_magnitude(Value correct, Value incorrect);

enum class ResilienceCase : uint8_t { not_resilient, case1, case2 };

struct MagnitudeChange {
    Location loc;
    double before = 0;
    double after = 0;
};

struct ResilienceVerdict {
    ResilienceCase kind = ResilienceCase::not_resilient;
    bool boundary_unaligned = false;
    std::vector<Location> corrupted_inputs;
    std::vector<Location> corrupted_outputs;   // empty for Case 1
    std::vector<MagnitudeChange> magnitude_evidence;  // Case 2
};

/// Case 1: some input enters corrupted, every output leaves clean.
/// Case 2: corrupted input and output, but some boundary location's error
/// magnitude strictly shrinks across the instance.
ResilienceVerdict classify_region(const TracePair& pair, const CodeRegionInstance& instance,
                                  const RegionInterface& interface);

struct DropPoint {
    uint64_t index = 0;
    uint32_t src_line = 0;
    std::vector<AclDeath> dying;
};

/// One entry per strict decrease of the alive-corrupted counts.
std::vector<DropPoint> find_drop_points(const AclTable& table, const Trace& faulty);

/// Feature order used for all reports and CSV columns.
enum class PatternKind : uint8_t {
    conditional_statement = 0,
    shifting = 1,
    truncation = 2,
    dcl = 3,
    repeated_additions = 4,
    overwriting = 5,
};
constexpr size_t kPatternCount = 6;
const char* pattern_name(PatternKind k);

enum class EvidenceKind : uint8_t { drop_point, magnitude_decrease };

struct PatternInstance {
    PatternKind kind;
    int32_t region_id = -1;
    uint32_t instance_ordinal = 0;
    std::vector<uint64_t> anchor_indices;
    std::vector<uint32_t> src_lines;
    std::string note;
    EvidenceKind evidence = EvidenceKind::drop_point;
    uint64_t evidence_index = 0;
};

struct DetectorConfig {
    uint32_t repeated_add_min_updates = 3;
};

/// Runs the six fault-conditioned detectors over an aligned pair.
std::vector<PatternInstance> detect_patterns(const TracePair& pair, const AclTable& table,
                                             const std::vector<CodeRegionInstance>& regions,
                                             const DetectorConfig& config = {});

struct FeatureVector {
    std::array<double, kPatternCount> rates{};
    uint64_t total_dynamic_instructions = 0;
};

/// Pattern-instance counts normalized by trace length.
FeatureVector feature_vector(const Trace& trace, const std::vector<PatternInstance>& instances);

struct StructuralConfig {
    /// Region whose instances chunk the trace for the dead-location rate;
    /// unset picks the top-level region with the most instances.
    std::optional<int32_t> chunk_region;
    uint32_t repeated_add_min_updates = 3;
};

/// Potential-pattern-site rates counted on a fault-free trace: compares
/// feeding branches, shifts, truncating conversions and digit-budget
/// prints, self-accumulating add chains, and overwrites of previously
/// accessed locations. The dead-location rate is the chunk-averaged
/// fraction of locations never read again after their chunk.
FeatureVector structural_features(const Trace& trace, const StructuralConfig& config = {});

} // namespace fliptrace
