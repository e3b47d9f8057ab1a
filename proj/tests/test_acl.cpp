#include <doctest.h>

#include <iostream>

#include "fliptrace/acl.hpp"
#include "fliptrace/interp.hpp"
#include "support/acl_oracle.hpp"
#include "support/helpers.hpp"
#include "support/random_prog.hpp"

using namespace fliptrace;
using namespace fliptrace::testing;

namespace {

struct PairData {
    RunOutcome golden;
    RunOutcome faulty;
    FaultSpec fault;

    TracePair pair() { return align_pair(golden.trace, faulty.trace, fault); }
};

PairData make_pair(const Program& p, const FaultSpec& fault, const InputMap& in = {},
                   uint64_t budget = 100'000) {
    PairData d;
    d.golden = run_golden(p, in, budget);
    d.fault = fault;
    d.faulty = run_faulty(p, fault, in, budget);
    return d;
}

} // namespace

TEST_CASE("the figure-style fixture: row 0,1,1,1,0 with a clean overwrite") {
    Program p = load_fixture("acl_fig.fir");
    // Corrupt the result of the second instruction (dynamic index 1).
    PairData d = make_pair(p, FaultSpec{1, true, 0, 1});
    REQUIRE(d.faulty.status == RunStatus::completed);
    TracePair pair = d.pair();
    AclTable table = build_acl(pair);

    Location v = reg_by_name(p, "%v");
    auto row = table.row_bits(v);
    REQUIRE(row.size() >= 5);
    CHECK(row[0] == 0);
    CHECK(row[1] == 1);
    CHECK(row[2] == 1);
    CHECK(row[3] == 1);
    CHECK(row[4] == 0);
    for (size_t i = 5; i < row.size(); ++i) CHECK(row[i] == 0);

    REQUIRE(table.deaths.size() == 1);
    CHECK(table.deaths[0].loc == v);
    CHECK(table.deaths[0].index == 4);
    CHECK(table.deaths[0].cause == DeathCause::clean_overwrite);

    // Count series is the same row: only one corrupted location.
    CHECK(table.counts == std::vector<uint32_t>{0, 1, 1, 1, 0});
    CHECK(acl_counts(table) == table.counts);
}

TEST_CASE("a fault into a never-read register dies immediately") {
    Program p = load_fixture("dead_reg.fir");
    PairData d = make_pair(p, FaultSpec{1, true, 0, 5});
    AclTable table = build_acl(d.pair());
    Location dead = reg_by_name(p, "%dead");
    auto row = table.row_bits(dead);
    REQUIRE(row.size() > 2);
    CHECK(row[1] == 1);
    for (size_t i = 2; i < row.size(); ++i) CHECK(row[i] == 0);
    REQUIRE(table.deaths.size() == 1);
    CHECK(table.deaths[0].cause == DeathCause::disuse);
    CHECK(table.deaths[0].index == 2);
}

TEST_CASE("a fault overwritten at the next instruction is a single 1") {
    Program p = load_fixture("overwrite_min.fir");
    PairData d = make_pair(p, FaultSpec{1, true, 0, 4});
    AclTable table = build_acl(d.pair());
    Location x = reg_by_name(p, "%x");
    auto row = table.row_bits(x);
    CHECK(row[1] == 1);
    for (size_t i = 2; i < row.size(); ++i) CHECK(row[i] == 0);
    REQUIRE(table.deaths.size() == 1);
    CHECK(table.deaths[0].cause == DeathCause::clean_overwrite);
    CHECK(table.deaths[0].index == 2);
}

TEST_CASE("counts of an empty table form an empty sequence") {
    AclTable table;
    CHECK(acl_counts(table).empty());
}

TEST_CASE("a pair without a fault yields an all-zero table") {
    Program p = load_fixture("dotprod.fir");
    RunOutcome golden = run_golden(p, dotprod_input());
    TracePair pair = align_pair(golden.trace, golden.trace, std::nullopt);
    AclTable table = build_acl(pair);
    CHECK(table.rows.empty());
    for (uint32_t c : table.counts) CHECK(c == 0);
}

TEST_CASE("lulesh-style fixture: counts rise then drop twice at the adds") {
    Program p = load_fixture("lulesh_mirror.fir");
    RunOutcome golden = run_golden(p);
    // The second (last-iteration) load of the field cell M[20].
    std::optional<uint64_t> target;
    int seen = 0;
    for (const auto& ev : golden.trace.events) {
        if (ev.op != Opcode::load) continue;
        for (const auto& loc : ev.operand_locs) {
            if (loc == Location::make_mem(20) && seen++ == 1) target = ev.index;
        }
    }
    REQUIRE(target.has_value());
    PairData d = make_pair(p, FaultSpec{*target, true, 0, 2});
    REQUIRE(d.faulty.status == RunStatus::completed);
    AclTable table = build_acl(d.pair());

    // Strict decreases of the counts: exactly the two aggregation adds.
    std::vector<uint64_t> drops;
    for (uint64_t i = 1; i < table.counts.size(); ++i) {
        if (table.counts[i] < table.counts[i - 1]) drops.push_back(i);
    }
    REQUIRE(drops.size() == 2);
    CHECK(d.faulty.trace.events[drops[0]].op == Opcode::fadd);
    CHECK(d.faulty.trace.events[drops[1]].op == Opcode::fadd);
    CHECK(drops[1] == drops[0] + 1);
    // Rising before the first drop.
    CHECK(table.counts[drops[0] - 1] == 4);
    CHECK(table.counts[drops[0]] == 3);
    CHECK(table.counts[drops[1]] == 2);

    // Agreement with the brute-force oracle on this fixture.
    TracePair pair = d.pair();
    std::string diff;
    CHECK_MESSAGE(tables_equal(build_acl(pair), brute_force_acl(pair), &diff), diff);
}

TEST_CASE("degraded flag is set when control flow diverges") {
    Program p = load_fixture("branch_skip.fir");
    RunOutcome golden = run_golden(p);
    std::vector<uint64_t> icmps;
    for (const auto& ev : golden.trace.events) {
        if (ev.op == Opcode::icmp_lt) icmps.push_back(ev.index);
    }
    FaultSpec fault{icmps[2], true, 0, 0};
    PairData d = make_pair(p, fault);
    AclTable table = build_acl(d.pair());
    CHECK(table.value_compare_degraded);

    // And without divergence it is not set.
    Program q = load_fixture("acl_fig.fir");
    PairData clean = make_pair(q, FaultSpec{1, true, 0, 1});
    CHECK(!build_acl(clean.pair()).value_compare_degraded);
}

TEST_CASE("oracle equivalence and structural invariants on random programs") {
    int checked = 0;
    for (uint64_t seed = 1000; seed < 1400 && checked < 170; ++seed) {
        Program p = parse_program(generate_random_source(seed));
        ExecOptions opts;
        opts.budget = 10000;
        RunOutcome golden = execute(p, {}, std::nullopt, opts);
        if (golden.status != RunStatus::completed || golden.trace.size() == 0) continue;
        FaultSpec fault = pick_random_fault(golden.trace, seed);
        RunOutcome faulty = execute(p, {}, fault, opts);
        TracePair pair = align_pair(golden.trace, faulty.trace, fault);
        AclTable built = build_acl(pair);
        AclTable oracle = brute_force_acl(pair);
        std::string diff;
        bool equal = tables_equal(built, oracle, &diff);
        if (!equal) {
            std::cerr << "seed " << seed << ": " << diff << "\n";
        }
        REQUIRE(equal);
        ++checked;

        // Monotone death: within each row, runs never re-open without a
        // re-corruption (iow: runs are disjoint and ordered).
        for (const auto& [loc, runs] : built.rows) {
            (void)loc;
            for (size_t k = 1; k < runs.size(); ++k) {
                CHECK(runs[k - 1].second < runs[k].first);
            }
        }
        // Count conservation: births - deaths explain every delta.
        std::vector<int64_t> births(built.n_end, 0), deaths(built.n_end, 0);
        for (const auto& [loc, runs] : built.rows) {
            (void)loc;
            for (const auto& [s, e] : runs) {
                if (s < built.n_end) births[s]++;
                if (e < built.n_end) deaths[e]++;
            }
        }
        for (uint64_t i = 1; i < built.n_end; ++i) {
            int64_t delta = int64_t(built.counts[i]) - int64_t(built.counts[i - 1]);
            CHECK(delta == births[i] - deaths[i]);
        }
        // Drop soundness: every strict decrease has at least one recorded
        // death with a cause.
        for (uint64_t i = 1; i < built.n_end; ++i) {
            if (built.counts[i] < built.counts[i - 1]) {
                bool found = false;
                for (const auto& death : built.deaths) {
                    if (death.index == i) found = true;
                }
                CHECK(found);
            }
        }
    }
    // The corpus must actually exercise the analysis.
    CHECK(checked >= 170);
}
