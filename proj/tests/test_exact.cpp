#include <gtest/gtest.h>

#include "jobshop/exact.hpp"
#include "jobshop/policies.hpp"
#include "support.hpp"

using namespace jobshop;
using namespace jobshop::testing;

TEST(Exact, SingleJobTwoMachinesIsForced) {
    Instance inst;
    inst.machines = {{0, "M1", {{0}}}, {1, "M2", {{0}}}};
    inst.transport = {{0, 0}, {0, 0}};
    inst.buffers = {{0, 5}, {1, 5}};
    inst.jobs = {{0, "J1", 10, 100, {{0, 0, 0.5, 1}, {1, 0, 0.25, 1}}}};
    const auto res = brute_force_optimal(shared(inst), Objective::Makespan);
    EXPECT_DOUBLE_EQ(res.value, 10 * 0.5 + 10 * 0.25);
}

TEST(Exact, TwoJobsOneMachineMatchesBothOrders) {
    Instance inst;
    inst.machines = {{0, "M1", {{0, 3, 9}, {2, 0, 7}, {1, 4, 0}}}};
    inst.transport = {{0}};
    inst.buffers = {{0, 5}};
    inst.jobs = {{0, "J1", 10, 100, {{0, 1, 1.0, 1}}}, {1, "J2", 5, 100, {{0, 2, 2.0, 1}}}};
    // J1 first: 3 + 10 + 7 + 10; J2 first: 9 + 10 + 4 + 10
    const double j1_first = 3 + 10 + 7 + 10;
    const double j2_first = 9 + 10 + 4 + 10;
    const auto res = brute_force_optimal(shared(inst), Objective::Makespan);
    EXPECT_DOUBLE_EQ(res.value, std::min(j1_first, j2_first));
    EXPECT_EQ(res.schedule.intervals.front().job, 0);
    EXPECT_TRUE(validate_schedule(inst, res.schedule).empty());
}

TEST(Exact, MatchesPermutationOracleWhenBuffersAreRoomy) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        SCOPED_TRACE(seed);
        auto spec = small_spec(seed, 3, 3);
        const auto inst = with_roomy_buffers(generate_instance(spec));
        if (inst.op_total() > 9) continue;
        const auto res = brute_force_optimal(shared(inst), Objective::Makespan);
        EXPECT_NEAR(res.value, permutation_oracle_makespan(inst), 1e-9);
        EXPECT_TRUE(validate_schedule(inst, res.schedule).empty());
        EXPECT_NEAR(compute_kpis(inst, res.schedule).makespan, res.value, 1e-9);
    }
}

TEST(Exact, ExampleOptimum) {
    const auto inst = example_instance();
    const auto res = brute_force_optimal(example(), Objective::Makespan);
    const double oracle = permutation_oracle_makespan(inst);
    EXPECT_GE(res.value, oracle - 1e-9);
    EXPECT_NEAR(brute_force_optimal(shared(with_roomy_buffers(inst)), Objective::Makespan).value, oracle, 1e-9);
    EXPECT_DOUBLE_EQ(res.value, kExampleOptimalMakespan);
    EXPECT_DOUBLE_EQ(oracle, kExampleOptimalMakespan);
    EXPECT_TRUE(validate_schedule(inst, res.schedule).empty());
}

TEST(Exact, LowerBoundsEveryHeuristic) {
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        auto inst = shared(generate_instance(small_spec(seed, 3, 3)));
        double best;
        try {
            best = brute_force_optimal(inst, Objective::Makespan).value;
        } catch (const DomainError&) {
            continue;  // every schedule deadlocks
        }
        for (auto kind : {PolicyKind::Fcfs, PolicyKind::Edd, PolicyKind::Spt, PolicyKind::Lpt, PolicyKind::Random}) {
            HeuristicPolicy p(kind);
            const auto res = rollout(inst, RewardConfig::makespan_only(), Features{}, p, seed);
            if (!res.deadlocked) EXPECT_GE(res.kpis.makespan, best - 1e-9);
        }
    }
}

TEST(Exact, TardinessObjectiveAgainstOrders) {
    // one machine, three jobs: tardiness optimum by enumerating the 6 orders
    Instance inst;
    inst.machines = {{0, "M1", {{0, 1, 1, 1}, {1, 0, 2, 3}, {1, 2, 0, 1}, {1, 3, 1, 0}}}};
    inst.transport = {{0}};
    inst.buffers = {{0, 10}};
    inst.jobs = {{0, "J1", 4, 12, {{0, 1, 1.0, 1}}}, {1, "J2", 3, 5, {{0, 2, 1.0, 1}}}, {2, "J3", 6, 9, {{0, 3, 1.0, 1}}}};
    std::vector<int> order{0, 1, 2};
    double best = 1e18;
    do {
        double clock = 0, tardy = 0;
        int setup = 0;
        for (int j : order) {
            const auto& op = inst.jobs[j].ops[0];
            clock += inst.machines[0].setup_time[setup][op.setup] + inst.jobs[j].batch_size * op.unit_time;
            setup = op.setup;
            tardy += std::max(0.0, clock - inst.jobs[j].deadline);
        }
        best = std::min(best, tardy);
    } while (std::next_permutation(order.begin(), order.end()));
    const auto res = brute_force_optimal(shared(inst), Objective::TotalTardiness);
    EXPECT_DOUBLE_EQ(res.value, best);
    EXPECT_DOUBLE_EQ(compute_kpis(inst, res.schedule).total_tardiness, best);
}

TEST(Exact, NodeLimitRaises) {
    ExactOptions opts;
    opts.node_limit = 10;
    EXPECT_THROW(brute_force_optimal(example(), Objective::Makespan, opts), GuardExceeded);
    try {
        brute_force_optimal(example(), Objective::Makespan, opts);
    } catch (const GuardExceeded& e) {
        EXPECT_NE(std::string(e.what()).find("instance too large for exact search"), std::string::npos);
    }
}

TEST(Exact, CompletesAPartialEpisode) {
    Environment env(example(), RewardConfig::makespan_only());
    env.step(Action::assign(2));
    env.step(Action::noop());
    const auto res = brute_force_optimal(env, Objective::Makespan);
    const auto full = brute_force_optimal(example(), Objective::Makespan);
    EXPECT_GE(res.value, full.value - 1e-9);
    EXPECT_EQ(res.schedule.intervals.front().job, 2);
    EXPECT_TRUE(validate_schedule(env.instance(), res.schedule).empty());
}
