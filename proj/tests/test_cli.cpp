#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "jobshop/io.hpp"
#include "support.hpp"

using namespace jobshop;
using namespace jobshop::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("jobshop_cli_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    Outcome cli(const std::string& args) const {
        const std::string cmd =
            "cd '" + dir_.string() + "' && '" JOBSHOP_CLI_PATH "' " + args + " 2>'" + path("stderr.txt") + "'";
        FILE* pipe = popen(cmd.c_str(), "r");
        std::string out;
        char buf[4096];
        std::size_t n;
        while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
        const int status = pclose(pipe);
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
    }

    fs::path dir_;
};

const std::string kBundled = std::string(JOBSHOP_DATA_DIR) + "/example3x3.json";

}  // namespace

TEST_F(Cli, ValidateBundledInstance) {
    EXPECT_EQ(cli("validate --instance example3x3").code, 0);
    const Outcome r = cli("validate --instance " + kBundled);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find(instance_hash(example_instance())), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("plan --seed banana").code, 1);
    EXPECT_EQ(cli("plan --goal fastest").code, 1);
    EXPECT_EQ(cli("evaluate --runs 0").code, 1);
    EXPECT_EQ(cli("plan --policy nosuchfile.json").code, 1);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, InvalidInputExitsTwo) {
    json doc = serialize_instance(example_instance());
    doc["jobs"][0]["operations"][1]["volume"] = -3;
    write_file(path("bad.json"), doc.dump());
    EXPECT_EQ(cli("validate --instance bad.json").code, 2);
    write_file(path("broken.json"), "{");
    EXPECT_EQ(cli("plan --instance broken.json").code, 2);
}

TEST_F(Cli, PlanWritesValidScheduleAndGantt) {
    const Outcome r = cli("plan --instance example3x3 --policy edd --seed 4");
    ASSERT_EQ(r.code, 0) << read_file(path("stderr.txt"));
    const auto direct = rollout(example(), RewardConfig::makespan_only(), Features{}, HeuristicPolicy(PolicyKind::Edd), 4);
    EXPECT_EQ(r.out, kpi_table({{"EDD", direct.kpis}}));

    const json doc = json::parse(read_file(path("schedule.json")));
    const Schedule s = schedule_from_json(doc);
    EXPECT_TRUE(validate_schedule(example_instance(), s).empty());
    EXPECT_EQ(s, direct.schedule);
    EXPECT_EQ(read_file(path("gantt.svg")), render_gantt(example_instance(), s, GanttFormat::Svg));
    EXPECT_EQ(cli("validate --schedule schedule.json").code, 0);

    const Outcome csv = cli("plan --policy fcfs --csv --gantt-out ''");
    EXPECT_EQ(csv.code, 0);
    EXPECT_EQ(csv.out.rfind("policy,makespan", 0), 0u);
}

TEST_F(Cli, ViolatingScheduleExitsTwo) {
    ASSERT_EQ(cli("plan --policy spt").code, 0);
    json doc = json::parse(read_file(path("schedule.json")));
    Schedule s = schedule_from_json(doc);
    // start the last interval far too early
    auto& iv = s.intervals.back();
    const double shift = iv.transport_start;
    iv.transport_start -= shift;
    iv.setup_start -= shift;
    iv.proc_start -= shift;
    iv.end -= shift;
    write_file(path("edited.json"), schedule_to_json(example_instance(), s, "edit").dump());
    const Outcome r = cli("validate --schedule edited.json");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.out.empty());
}

TEST_F(Cli, ExactGuardExitsThree) {
    EXPECT_EQ(cli("plan --policy exact --node-limit 5").code, 3);
    const Outcome ok = cli("plan --policy exact");
    EXPECT_EQ(ok.code, 0);
    EXPECT_NE(ok.out.find("163"), std::string::npos);
}

TEST_F(Cli, ReplayReproducesTrajectoryByteForByte) {
    ASSERT_EQ(cli("plan --policy random --seed 11 --goal balanced --trajectory-out traj.jsonl").code, 0);
    const Outcome r = cli("replay --trajectory traj.jsonl");
    EXPECT_EQ(r.code, 0) << read_file(path("stderr.txt"));

    std::string text = read_file(path("traj.jsonl"));
    const auto pos = text.find("\"reward\":", text.find("\"type\":\"step\""));
    ASSERT_NE(pos, std::string::npos);
    text.insert(pos + 9, "1");  // corrupt one recorded reward
    write_file(path("tampered.jsonl"), text);
    EXPECT_EQ(cli("replay --trajectory tampered.jsonl").code, 2);

    GenSpec spec;
    spec.seed = 2;
    write_file(path("other.json"), serialize_instance(generate_instance(spec)).dump());
    EXPECT_EQ(cli("replay --instance other.json --trajectory traj.jsonl").code, 2);
}

TEST_F(Cli, GenerateIsDeterministic) {
    ASSERT_EQ(cli("generate --seed 9 --jobs 4 --machines 3 -o a.json").code, 0);
    ASSERT_EQ(cli("generate --seed 9 --jobs 4 --machines 3 -o b.json").code, 0);
    EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
    const Instance inst = parse_instance_text(read_file(path("a.json")));
    EXPECT_EQ(inst.job_count(), 4);
    EXPECT_EQ(inst.machine_count(), 3);
    EXPECT_EQ(cli("validate --instance a.json").code, 0);
    EXPECT_EQ(cli("generate --machines 0").code, 1);
}

TEST_F(Cli, TrainThenPlanWithPolicyFile) {
    const Outcome r = cli("train --kind q --episodes 200 --seed 3 -o q.json --curve q.csv");
    ASSERT_EQ(r.code, 0) << read_file(path("stderr.txt"));
    const std::string curve = read_file(path("q.csv"));
    EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 201);
    EXPECT_EQ(cli("plan --policy q.json").code, 0);
    EXPECT_EQ(cli("evaluate --policy q.json --policy edd --runs 3").code, 0);
}

TEST_F(Cli, EvaluateAndTextGantt) {
    const Outcome e = cli("evaluate --runs 5 --csv");
    EXPECT_EQ(e.code, 0);
    for (const char* name : {"FCFS", "EDD", "SPT", "LPT", "RANDOM"}) EXPECT_NE(e.out.find(name), std::string::npos);
    EXPECT_EQ(e.out, cli("evaluate --runs 5 --csv").out);

    ASSERT_EQ(cli("plan --policy lpt").code, 0);
    const Outcome g = cli("gantt --schedule schedule.json --format text");
    EXPECT_EQ(g.code, 0);
    EXPECT_EQ(g.out, render_gantt(example_instance(), schedule_from_json(json::parse(read_file(path("schedule.json")))),
                                  GanttFormat::Text));
}
