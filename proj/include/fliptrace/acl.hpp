#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "fliptrace/trace.hpp"

namespace fliptrace {

enum class DeathCause : uint8_t { disuse, clean_overwrite };

struct AclDeath {
    Location loc;
    uint64_t index = 0;  // first index at which the row bit is 0 again
    DeathCause cause = DeathCause::disuse;
};

/// Alive-corrupted-locations table for one faulty run.
///
/// A location's bit is 1 at index i when its value at that point differs
/// from the fault-free run's and the value is still needed: it will be read
/// again before the location is next written. The index at which the
/// corruption entered (the fault itself, or a corrupted write) always
/// carries bit 1, so even a never-read corruption is visible for one step.
/// A row falls to 0 at the earlier of its last future use retiring (death
/// by disuse) or an overwrite with a value equal to the fault-free
/// counterpart (death by clean overwrite); ties go to the overwrite.
///
/// The table covers [0, n_end) where n_end is the first output-phase
/// instruction (verify_check, else print), since deaths during output are
/// not masking. Corruption spans are kept over the whole trace.
struct AclTable {
    uint64_t fault_index = 0;
    uint64_t n_end = 0;       // N: table covers dynamic indices [0, N)
    uint64_t trace_length = 0;
    bool value_compare_degraded = false;

    /// 1-runs per location, clamped to [0, n_end); half-open [start, end).
    std::map<Location, std::vector<std::pair<uint64_t, uint64_t>>> rows;
    /// counts[i] = number of rows with bit 1 at i.
    std::vector<uint32_t> counts;
    /// Row deaths at index < n_end, in index order.
    std::vector<AclDeath> deaths;
    /// Corruption intervals per location over the full trace, [start, end);
    /// independent of aliveness.
    std::map<Location, std::vector<std::pair<uint64_t, uint64_t>>> corrupted_spans;

    bool bit(const Location& loc, uint64_t i) const;
    bool corrupted_at(const Location& loc, uint64_t i) const;
    /// Full-length row as 0/1 bytes, for asserting against table figures.
    std::vector<uint8_t> row_bits(const Location& loc) const;
};

/// Builds the ACL table for a pair. Requires pair.fault unless the pair is
/// fault-free, in which case the table is all zeros. While the traces are
/// control-aligned, "corrupted" means the value differs from the aligned
/// golden value; across control divergence the analysis degrades to pure
/// taint reachability and `value_compare_degraded` is set.
AclTable build_acl(const TracePair& pair);

/// Per-instruction totals of alive corrupted locations (column sums).
std::vector<uint32_t> acl_counts(const AclTable& table);

/// CSV: header of instruction indices, one row per corrupted location,
/// final `counts` row.
void acl_to_csv(const AclTable& table, const Trace& faulty, std::ostream& out);

} // namespace fliptrace
