#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fliptrace/program.hpp"
#include "fliptrace/trace.hpp"
#include "fliptrace/value.hpp"

namespace fliptrace {

using InputMap = std::map<Location, Value>;

enum class RunStatus : uint8_t { completed, trapped, hung };

enum class VerifyOutcome : uint8_t { not_present, passed, failed };

struct PrintRecord {
    uint64_t index = 0;   // dynamic instruction index of the print
    bool has_loc = true;  // false when an immediate was printed
    Location loc;
    Value value;
    int digits = 0;       // 0 = exact
    std::string formatted;
};

struct RunOutcome {
    RunStatus status = RunStatus::completed;
    std::string trap_reason;
    uint64_t trap_index = 0;        // dynamic index of the trapping instruction
    uint64_t instruction_count = 0;
    std::map<Location, Value> outputs;
    std::vector<PrintRecord> prints;
    VerifyOutcome verify = VerifyOutcome::not_present;
    Trace trace;                    // empty when tracing is disabled
};

struct ExecOptions {
    uint64_t budget = 10'000'000;
    bool record_trace = true;
    /// Golden outputs for verify_check; when absent, verify_check compares
    /// each declared location against its own current value (always passes).
    const std::map<Location, Value>* expected_outputs = nullptr;
    /// Overrides the program's verify tolerance when set.
    std::optional<double> verify_tol;
};

/// Deterministic interpretation of a validated program. When `fault` is
/// present, exactly one bit of the chosen operand location (flipped in place
/// before the instruction executes) or of the result (flipped after the
/// value is computed, before the write retires) is XOR-flipped.
///
/// Instances share no mutable state; distinct calls may run concurrently.
RunOutcome execute(const Program& program, const InputMap& input,
                   const std::optional<FaultSpec>& fault, const ExecOptions& opts);

/// Formats a value the way `print` renders it: exact for digits == 0,
/// otherwise scientific notation with `digits` significant digits.
std::string format_print_value(Value v, int digits);

} // namespace fliptrace
