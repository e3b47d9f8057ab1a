#include <doctest.h>

#include <limits>
#include <sstream>

#include "fliptrace/interp.hpp"
#include "support/helpers.hpp"

using namespace fliptrace;
using namespace fliptrace::testing;

TEST_CASE("fault-free dot product is exact and verifies") {
    Program p = load_fixture("dotprod.fir");
    RunOutcome out = run_golden(p, dotprod_input());
    REQUIRE(out.status == RunStatus::completed);
    CHECK(out.verify == VerifyOutcome::passed);
    REQUIRE(out.outputs.count(Location::make_mem(16)) == 1);
    CHECK(out.outputs.at(Location::make_mem(16)).f64() == kDotprodResult);
    CHECK(out.instruction_count == out.trace.size());
}

TEST_CASE("execution is deterministic, with and without a fault") {
    Program p = load_fixture("dotprod.fir");
    InputMap in = dotprod_input();
    RunOutcome a = run_golden(p, in);
    RunOutcome b = run_golden(p, in);
    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace.events[i].operand_values == b.trace.events[i].operand_values);
        CHECK(a.trace.events[i].result_value == b.trace.events[i].result_value);
    }

    FaultSpec fault{9, true, 0, 51};
    RunOutcome fa = run_faulty(p, fault, in);
    RunOutcome fb = run_faulty(p, fault, in);
    REQUIRE(fa.status == fb.status);
    REQUIRE(fa.trace.size() == fb.trace.size());
    for (size_t i = 0; i < fa.trace.size(); ++i) {
        CHECK(fa.trace.events[i].operand_values == fb.trace.events[i].operand_values);
    }
}

TEST_CASE("fault locality: the prefix before the fault is bit-identical") {
    Program p = load_fixture("dotprod.fir");
    InputMap in = dotprod_input();
    RunOutcome golden = run_golden(p, in);
    FaultSpec fault{12, true, 0, 3};
    RunOutcome faulty = run_faulty(p, fault, in);
    for (uint64_t i = 0; i < fault.instr_index; ++i) {
        const TraceEvent& g = golden.trace.events[i];
        const TraceEvent& f = faulty.trace.events[i];
        CHECK(g.op == f.op);
        CHECK(g.operand_values == f.operand_values);
        CHECK(g.result_value == f.result_value);
    }
}

TEST_CASE("a fault in address arithmetic traps out of bounds") {
    Program p = load_fixture("dotprod.fir");
    InputMap in = dotprod_input();
    RunOutcome golden = run_golden(p, in);
    // Find an address-computing instruction in the trace: the result that
    // feeds a load's base register (picked by scanning for iadd feeding an
    // address-marked operand).
    std::optional<uint64_t> addr_def;
    for (const auto& ev : golden.trace.events) {
        if (ev.op != Opcode::load) continue;
        if (!ev.operand_locs.empty() && ev.operand_is_address(0) && ev.index > 0) {
            // Pick a load whose base register was computed by the event
            // immediately before it, so the flip cannot be branched around.
            const auto& def = golden.trace.events[ev.index - 1];
            if (def.result_loc && *def.result_loc == ev.operand_locs[0]) {
                addr_def = ev.index - 1;
                break;
            }
        }
    }
    REQUIRE(addr_def.has_value());
    FaultSpec fault{*addr_def, true, 0, 40};  // bit 40 pushes the cell far out
    RunOutcome faulty = run_faulty(p, fault, in);
    CHECK(faulty.status == RunStatus::trapped);
    CHECK(faulty.trap_reason == "memory out of bounds");
}

TEST_CASE("integer divide by zero traps; float divide by zero is IEEE") {
    const char* src = R"(@func main
  %a = iadd 6, 0
  %b = iadd 0, 0
  %q = idiv %a, %b
  ret
)";
    RunOutcome out = run_golden(parse_program(src));
    CHECK(out.status == RunStatus::trapped);
    CHECK(out.trap_reason == "integer divide by zero");
    CHECK(out.instruction_count == 2);  // the idiv did not retire

    const char* fsrc = R"(@func main
  %a = fadd 6.0, 0.0
  %q = fdiv %a, 0.0
  print %q
  ret
)";
    RunOutcome fout = run_golden(parse_program(fsrc));
    CHECK(fout.status == RunStatus::completed);
    CHECK(fout.prints[0].value.f64() == std::numeric_limits<double>::infinity());
}

TEST_CASE("budget exhaustion reports a hang") {
    const char* src = R"(@func main
loop:
  br loop
)";
    ExecOptions opts;
    opts.budget = 1000;
    RunOutcome out = execute(parse_program(src), {}, std::nullopt, opts);
    CHECK(out.status == RunStatus::hung);
    CHECK(out.instruction_count == 1000);
}

TEST_CASE("operand faults flip the location in storage") {
    // Flipping an operand of the read at index 2 must be visible to the
    // later read of the same register at index 3.
    const char* src = R"(@func main
  %x = iadd 8, 0
  %y = iadd 0, 0
  %a = iadd %x, 0
  %b = iadd %x, 0
  print %a
  print %b
  ret
)";
    Program p = parse_program(src);
    FaultSpec fault{2, false, 0, 1};  // flip bit 1 of %x as read by "%a = iadd %x, 0"
    RunOutcome out = run_faulty(p, fault);
    REQUIRE(out.status == RunStatus::completed);
    CHECK(out.prints[0].value.i64() == 10);
    CHECK(out.prints[1].value.i64() == 10);
}

TEST_CASE("result faults flip the value after computation") {
    const char* src = R"(@func main
  %x = iadd 8, 0
  print %x
  ret
)";
    FaultSpec fault{0, true, 0, 0};
    RunOutcome out = run_faulty(parse_program(src), fault);
    CHECK(out.prints[0].value.i64() == 9);
}

TEST_CASE("fcmp with a NaN operand evaluates false instead of trapping") {
    const char* src = R"(@func main
  %z = fadd 0.0, 0.0
  %nan = fdiv %z, 0.0
  %lt = fcmp.lt %nan, 1.0
  %ne = fcmp.ne %nan, 1.0
  print %lt
  print %ne
  ret
)";
    RunOutcome out = run_golden(parse_program(src));
    REQUIRE(out.status == RunStatus::completed);
    CHECK(out.prints[0].value.i64() == 0);
    CHECK(out.prints[1].value.i64() == 0);
}

TEST_CASE("icmp on a float operand traps as a type error") {
    const char* src = R"(@func main
  %f = fadd 1.5, 0.0
  %c = icmp.lt %f, 2
  ret
)";
    RunOutcome out = run_golden(parse_program(src));
    CHECK(out.status == RunStatus::trapped);
    CHECK(out.trap_reason.find("type mismatch") != std::string::npos);
}

TEST_CASE("calls give the callee a fresh frame and return") {
    const char* src = R"(@func main
  %x = iadd 3, 0
  store M[0], %x
  call @double_it
  %r = load M[0]
  print %r
  ret
@func double_it
  %v = load M[0]
  %v = iadd %v, %v
  store M[0], %v
  ret
)";
    RunOutcome out = run_golden(parse_program(src));
    REQUIRE(out.status == RunStatus::completed);
    CHECK(out.prints[0].value.i64() == 6);
}

TEST_CASE("verify_check compares against expected outputs within tolerance") {
    Program p = load_fixture("dotprod.fir");
    InputMap in = dotprod_input();
    RunOutcome golden = run_golden(p, in);

    std::map<Location, Value> expected = golden.outputs;
    RunOutcome again = run_faulty(p, FaultSpec{5, true, 0, 0}, in, 1'000'000, &expected);
    // Bit 0 of a loaded vector element: tiny relative change, passes 1e-10?
    // Not necessarily; just check the verify outcome is recorded.
    CHECK(again.verify != VerifyOutcome::not_present);

    // A low-mantissa flip of the final store passes the 1e-10 tolerance.
    uint64_t store_idx = 0;
    for (const auto& ev : golden.trace.events) {
        if (ev.op == Opcode::store) store_idx = ev.index;
    }
    RunOutcome low = run_faulty(p, FaultSpec{store_idx, true, 0, 0}, in, 1'000'000, &expected);
    REQUIRE(low.status == RunStatus::completed);
    CHECK(low.verify == VerifyOutcome::passed);
    // A high-exponent flip fails verification.
    RunOutcome high = run_faulty(p, FaultSpec{store_idx, true, 0, 62}, in, 1'000'000, &expected);
    REQUIRE(high.status == RunStatus::completed);
    CHECK(high.verify == VerifyOutcome::failed);
}
