#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "jobshop/io.hpp"
#include "jobshop/policies.hpp"
#include "jobshop/schedule.hpp"
#include "support.hpp"

using namespace jobshop;
using jobshop::testing::example;

namespace {

// J3 then J1 then J2 on M1 ... produced by EDD on the example instance.
Schedule edd_schedule() {
    HeuristicPolicy edd(PolicyKind::Edd);
    return rollout(example(), RewardConfig{}, Features{}, edd, 0).schedule;
}

std::set<ViolationCode> codes(const Instance& inst, const Schedule& s) {
    std::set<ViolationCode> out;
    for (const auto& v : validate_schedule(inst, s)) out.insert(v.code);
    return out;
}

std::size_t find(const Schedule& s, JobId job, int op) {
    for (std::size_t i = 0; i < s.intervals.size(); ++i)
        if (s.intervals[i].job == job && s.intervals[i].op_index == op) return i;
    ADD_FAILURE() << "interval not found";
    return 0;
}

}  // namespace

TEST(ValidateSchedule, EnvironmentScheduleIsClean) {
    const auto inst = example_instance();
    const auto s = edd_schedule();
    EXPECT_TRUE(validate_schedule(inst, s).empty());
    EXPECT_EQ(s.intervals.size(), 9u);
}

TEST(ValidateSchedule, ExampleTracePrefixIsCleanAndPartial) {
    Environment env(example());
    env.step(Action::assign(2));
    env.step(Action::noop());
    env.step(Action::assign(2));
    env.step(Action::assign(0));
    EXPECT_TRUE(validate_schedule(env.instance(), env.schedule()).empty());
    // (J3, M1, [0,29]) and (J1, M1, [29,53])
    const auto segs = env.schedule().segments();
    bool j3 = false, j1 = false;
    for (const auto& s : segs) {
        if (s.machine != 0) continue;
        if (s.job == 2 && s.kind == IntervalKind::Setup) EXPECT_EQ(s.start, 0.0);
        if (s.job == 2 && s.kind == IntervalKind::Process) j3 = s.end == 29.0;
        if (s.job == 0 && s.kind == IntervalKind::Setup) EXPECT_EQ(s.start, 29.0);
        if (s.job == 0 && s.kind == IntervalKind::Process) j1 = s.end == 53.0;
    }
    EXPECT_TRUE(j3);
    EXPECT_TRUE(j1);
}

TEST(ValidateSchedule, OverlapDetected) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    // pull J1's first operation on M1 back so it collides with J3
    auto& iv = s.intervals[find(s, 0, 0)];
    const double shift = 10.0;
    iv.transport_start -= shift;
    iv.setup_start -= shift;
    iv.proc_start -= shift;
    iv.end -= shift;
    EXPECT_TRUE(codes(inst, s).count(ViolationCode::Overlap));
}

TEST(ValidateSchedule, SequenceViolationWhenSuccessorStartsEarly) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    auto& iv = s.intervals[find(s, 2, 1)];  // J3 on M2
    const double shift = iv.transport_start - 1.0;
    iv.transport_start -= shift;
    iv.setup_start -= shift;
    iv.proc_start -= shift;
    iv.end -= shift;
    EXPECT_TRUE(codes(inst, s).count(ViolationCode::Sequence));
}

TEST(ValidateSchedule, MissingPredecessorIsSequenceViolation) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    s.intervals.erase(s.intervals.begin() + static_cast<long>(find(s, 1, 0)));
    const auto found = codes(inst, s);
    EXPECT_TRUE(found.count(ViolationCode::Sequence));
}

TEST(ValidateSchedule, ShortProcessingIsPreemption) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    s.intervals[find(s, 0, 1)].end -= 1.0;
    EXPECT_TRUE(codes(inst, s).count(ViolationCode::Preemption));
}

TEST(ValidateSchedule, SplitOperationIsPreemption) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    const auto original = s.intervals[find(s, 1, 2)];
    auto& first = s.intervals[find(s, 1, 2)];
    const double mid = (original.proc_start + original.end) / 2;
    first.end = mid;
    auto second = original;
    second.transport_start = second.setup_start = second.proc_start = mid + 5;
    second.end = original.end + 5;
    second.setup_from = second.setup_to;
    s.intervals.push_back(second);
    EXPECT_TRUE(codes(inst, s).count(ViolationCode::Preemption));
}

TEST(ValidateSchedule, TransportUnderrunDetected) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    // claim J3 reached M2 without travelling: setup right at dispatch
    auto& iv = s.intervals[find(s, 2, 1)];
    const double t = iv.setup_start - iv.transport_start;
    ASSERT_EQ(t, 10.0);
    iv.setup_start -= t;
    iv.proc_start -= t;
    iv.end -= t;
    EXPECT_TRUE(codes(inst, s).count(ViolationCode::TransportUnderrun));
}

TEST(ValidateSchedule, SetupMismatchDetected) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    auto a = s;
    a.intervals[find(a, 0, 0)].setup_from = 0;  // M1 is in s3 after J3
    EXPECT_TRUE(codes(inst, a).count(ViolationCode::SetupMismatch));

    auto b = s;
    auto& iv = b.intervals[find(b, 0, 0)];
    iv.proc_start -= 2.0;  // s3->s1 needs 8
    iv.end -= 2.0;
    EXPECT_TRUE(codes(inst, b).count(ViolationCode::SetupMismatch));

    auto c = s;
    c.intervals[find(c, 2, 0)].setup_to = 2;
    EXPECT_TRUE(codes(inst, c).count(ViolationCode::SetupMismatch));
}

TEST(ValidateSchedule, BufferOverflowDetected) {
    auto inst = example_instance();
    const auto s = edd_schedule();
    const auto k = compute_kpis(inst, s);
    inst.buffers[1].capacity = k.peak_buffer[1] - 1.0;
    ASSERT_GE(inst.buffers[1].capacity, 0.0);
    EXPECT_TRUE(codes(inst, s).count(ViolationCode::BufferOverflow));
}

TEST(ValidateSchedule, ForeignScheduleRaises) {
    const auto inst = example_instance();
    auto s = edd_schedule();
    s.intervals[0].job = 9;
    EXPECT_THROW(validate_schedule(inst, s), ScheduleError);
    auto t = edd_schedule();
    t.completion.pop_back();
    EXPECT_THROW(validate_schedule(inst, t), ScheduleError);
}

TEST(ComputeKpis, HandComputedExamplePrefix) {
    // J3 alone through M1 -> M2 -> M3.
    Environment env(example());
    env.step(Action::assign(2));  // [0,29) on M1 (4 setup)
    env.step(Action::noop());
    env.step(Action::assign(2));  // M2: transport 10, setup 8, process 16 -> 63
    env.step(Action::noop());
    env.step(Action::assign(2));  // M3: transport 15, setup 5, process 25 -> 108
    env.step(Action::noop());
    const auto k = compute_kpis(env.instance(), env.schedule());
    EXPECT_EQ(k.makespan, 108.0);
    EXPECT_EQ(k.completed_jobs, 1);
    EXPECT_EQ(k.total_tardiness, 8.0);
    EXPECT_EQ(k.tardy_jobs, 1);
    EXPECT_EQ(k.setup_time_total, 4.0 + 8.0 + 5.0);
    EXPECT_EQ(k.peak_buffer, (std::vector<double>{60, 15, 10}));
    EXPECT_DOUBLE_EQ(k.machine_utilization[0], 29.0 / 108.0);
    EXPECT_DOUBLE_EQ(k.machine_utilization[1], 24.0 / 108.0);
}

TEST(ComputeKpis, MatchEnvironmentCountersForEveryHeuristic) {
    for (auto kind : {PolicyKind::Fcfs, PolicyKind::Edd, PolicyKind::Spt, PolicyKind::Lpt, PolicyKind::Random}) {
        HeuristicPolicy p(kind);
        const auto res = rollout(example(), RewardConfig{}, Features{}, p, 3);
        const auto k = compute_kpis(example_instance(), res.schedule);
        EXPECT_EQ(k.makespan, res.kpis.makespan);
        EXPECT_NEAR(k.total_tardiness, res.kpis.total_tardiness, 1e-9);
        EXPECT_EQ(k.peak_buffer, res.kpis.peak_buffer);
        EXPECT_EQ(k.tardy_jobs, res.kpis.tardy_jobs);
    }
}

TEST(ComputeKpis, ThrowsOnInfeasibleSchedule) {
    auto s = edd_schedule();
    s.intervals[find(s, 0, 1)].end += 3.0;
    try {
        compute_kpis(example_instance(), s);
        FAIL();
    } catch (const ScheduleError& e) {
        EXPECT_FALSE(e.violations().empty());
    }
}

TEST(Gantt, TextListsSegmentsPerMachine) {
    Environment env(example());
    env.step(Action::assign(2));
    env.step(Action::noop());
    env.step(Action::assign(0));
    const auto text = render_gantt(env.instance(), env.schedule(), GanttFormat::Text);
    EXPECT_EQ(text,
              "gantt horizon=53\n"
              "M1: [0,4) SETUP J3/1 [4,29) PROCESS J3/1 [29,37) SETUP J1/1 [37,53) PROCESS J1/1\n"
              "M2:\n"
              "M3:\n");
}

TEST(Gantt, SvgMatchesGoldenFile) {
    const auto svg = render_gantt(example_instance(), edd_schedule(), GanttFormat::Svg);
    const std::string path = std::string(JOBSHOP_DATA_DIR) + "/golden/example3x3_edd.svg";
    std::ifstream in(path);
    ASSERT_TRUE(in) << "missing " << path;
    const std::string golden((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(svg, golden);
}

TEST(Gantt, SvgIsDeterministic) {
    EXPECT_EQ(render_gantt(example_instance(), edd_schedule(), GanttFormat::Svg),
              render_gantt(example_instance(), edd_schedule(), GanttFormat::Svg));
}

TEST(FormatNumber, TrimsTrailingZeros) {
    EXPECT_EQ(format_number(29.0), "29");
    EXPECT_EQ(format_number(0.0626), "0.063");
    EXPECT_EQ(format_number(-0.0001), "0");
    EXPECT_EQ(format_number(12.5), "12.5");
}
