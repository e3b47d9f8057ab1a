#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fliptrace/interp.hpp"

namespace fliptrace::testing {

/// Emits a random well-formed mini-IR program: straight-line prologue, an
/// optional counted loop (with optional nested region and conditional
/// skips), mixed int/float arithmetic, shifts, conversions, loads/stores,
/// and sometimes a verify or print epilogue. Deterministic per seed.
std::string generate_random_source(uint64_t seed);

/// Picks a random valid fault site from a golden trace.
FaultSpec pick_random_fault(const Trace& golden, uint64_t seed);

} // namespace fliptrace::testing
