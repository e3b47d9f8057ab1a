#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fliptrace/analysis.hpp"
#include "fliptrace/interp.hpp"

namespace fliptrace::testing {

inline std::string fixture_path(const std::string& name) {
    return std::string(FLIPTRACE_FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Program load_fixture(const std::string& name) {
    return parse_program(read_file(fixture_path(name)));
}

inline RunOutcome run_golden(const Program& program, const InputMap& input = {},
                             uint64_t budget = 1'000'000) {
    ExecOptions opts;
    opts.budget = budget;
    return execute(program, input, std::nullopt, opts);
}

inline RunOutcome run_faulty(const Program& program, const FaultSpec& fault,
                             const InputMap& input = {}, uint64_t budget = 1'000'000,
                             const std::map<Location, Value>* expected = nullptr) {
    ExecOptions opts;
    opts.budget = budget;
    opts.expected_outputs = expected;
    return execute(program, input, fault, opts);
}

inline InputMap dotprod_input() {
    InputMap in;
    const double a[4] = {1.5, 2.0, -0.5, 4.0};
    const double b[4] = {2.0, 0.25, 8.0, 1.0};
    for (uint64_t i = 0; i < 4; ++i) {
        in[Location::make_mem(i)] = Value::of_f64(a[i]);
        in[Location::make_mem(8 + i)] = Value::of_f64(b[i]);
    }
    return in;
}

constexpr double kDotprodResult = 1.5 * 2.0 + 2.0 * 0.25 + -0.5 * 8.0 + 4.0 * 1.0;

/// Register slot for a "%name" register, by display name.
inline Location reg_by_name(const Program& program, const std::string& name) {
    for (uint64_t slot = 0; slot < program.reg_names.size(); ++slot) {
        if (program.reg_names[slot] == name) return Location::make_reg(slot);
    }
    throw std::runtime_error("no register named " + name);
}

} // namespace fliptrace::testing
