#pragma once

#include "fliptrace/acl.hpp"

namespace fliptrace::testing {

/// Independent ACL reconstruction: recomputes the corrupted set per index by
/// forward replay and decides each bit by scanning ahead for the next use,
/// instead of the production one-pass interval bookkeeping. Intentionally
/// naive; quadratic in trace length.
AclTable brute_force_acl(const TracePair& pair);

/// Structural equality of the parts the oracle reproduces.
bool tables_equal(const AclTable& a, const AclTable& b, std::string* diff = nullptr);

} // namespace fliptrace::testing
