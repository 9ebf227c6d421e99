// jobshop command-line front end.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jobshop/exact.hpp"
#include "jobshop/io.hpp"
#include "jobshop/neural.hpp"
#include "jobshop/service.hpp"

using namespace jobshop;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kGuard = 3 };

struct Common {
    std::string instance = "example3x3";
    std::string goal = "makespan";
    std::string reward_file;
    bool presetup = false;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
    cmd->add_option("-i,--instance", c.instance, "instance file or \"example3x3\"")->capture_default_str();
    cmd->add_option("--goal", c.goal, "makespan | tardiness | balanced")
        ->check(CLI::IsMember({"makespan", "tardiness", "balanced"}, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--reward", c.reward_file, "JSON reward weights, overrides --goal")->check(CLI::ExistingFile);
    cmd->add_flag("--presetup", c.presetup, "enable pre-setup actions");
    if (with_seed) cmd->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
}

RewardConfig reward_of(const Common& c) {
    if (!c.reward_file.empty()) return reward_from_json(json::parse(read_file(c.reward_file)));
    return reward_for_goal(c.goal);
}

Features features_of(const Common& c) { return Features{c.presetup}; }

std::shared_ptr<const Instance> instance_of(const Common& c) {
    return std::make_shared<const Instance>(load_instance(c.instance));
}

void emit(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-")
        std::cout << content;
    else
        write_file(path, content);
}

// Name (heuristic) or path to a policy document.
std::unique_ptr<Policy> load_policy(const std::string& spec) {
    if (auto kind = parse_policy_kind(spec)) {
        if (*kind == PolicyKind::TabularQ || *kind == PolicyKind::Neural)
            throw CLI::ValidationError("--policy", "trained policies are loaded from their file");
        return std::make_unique<HeuristicPolicy>(*kind);
    }
    return policy_from_json(json::parse(read_file(spec)));
}

// ---- subcommands -----------------------------------------------------------

struct ValidateArgs {
    Common common;
    std::string schedule;
};

int cmd_validate(const ValidateArgs& a) {
    const Instance inst = load_instance(a.common.instance);
    std::cout << "instance " << inst.name << ": " << inst.job_count() << " jobs, " << inst.machine_count()
              << " machines, " << inst.op_total() << " operations, hash " << instance_hash(inst) << "\n";
    if (a.schedule.empty()) return kOk;
    const Schedule s = schedule_from_json(json::parse(read_file(a.schedule)));
    const auto violations = validate_schedule(inst, s);
    for (const auto& v : violations) std::cout << to_string(v.code) << ": " << v.detail << "\n";
    if (!violations.empty()) return kInvalid;
    std::cout << "schedule ok, makespan " << format_number(compute_kpis(inst, s).makespan) << "\n";
    return kOk;
}

struct GenerateArgs {
    GenSpec spec;
    std::string out;
};

int cmd_generate(const GenerateArgs& a) {
    a.spec.validate();
    emit(a.out, serialize_instance(generate_instance(a.spec)).dump(2) + "\n");
    return kOk;
}

struct PlanArgs {
    Common common;
    std::string policy = "edd";
    std::string schedule_out = "schedule.json";
    std::string gantt_out = "gantt.svg";
    std::string trajectory_out;
    bool csv = false;
    std::int64_t node_limit = 10'000'000;
};

int cmd_plan(const PlanArgs& a) {
    auto inst = instance_of(a.common);
    const RewardConfig reward = reward_of(a.common);
    const Features features = features_of(a.common);
    Schedule schedule;
    Kpis kpis;
    std::string label;
    if (parse_policy_kind(a.policy) == std::nullopt && (a.policy == "exact" || a.policy == "EXACT")) {
        ExactOptions opts;
        opts.node_limit = a.node_limit;
        const Objective obj = a.common.goal == "tardiness" ? Objective::TotalTardiness : Objective::Makespan;
        auto res = brute_force_optimal(Environment(inst, reward, features), obj, opts);
        schedule = std::move(res.schedule);
        label = "EXACT";
    } else {
        auto policy = load_policy(a.policy);
        label = policy->name();
        Environment env(inst, reward, features);
        const ActMode mode = policy->kind() == PolicyKind::TabularQ || policy->kind() == PolicyKind::Neural
                                 ? ActMode::Greedy
                                 : ActMode::Sample;
        auto res = rollout(env, *policy, a.common.seed, mode);
        schedule = std::move(res.schedule);
        if (!a.trajectory_out.empty()) {
            TrajectoryHeader h{instance_hash(*inst), label, a.common.seed, reward, features};
            emit(a.trajectory_out, trajectory_to_jsonl(h, res.trajectory, env.action_space()));
        }
        if (res.deadlocked) std::cerr << "warning: episode deadlocked, schedule is incomplete\n";
    }
    const auto violations = validate_schedule(*inst, schedule);
    kpis = compute_kpis(*inst, schedule);
    std::cout << (a.csv ? kpi_csv({{label, kpis}}) : kpi_table({{label, kpis}}));
    emit(a.schedule_out, schedule_to_json(*inst, schedule, label).dump(2) + "\n");
    if (!a.gantt_out.empty()) emit(a.gantt_out, render_gantt(*inst, schedule, GanttFormat::Svg));
    for (const auto& v : violations) std::cerr << to_string(v.code) << ": " << v.detail << "\n";
    bool complete = true;
    for (const auto& c : schedule.completion) complete = complete && c.has_value();
    return violations.empty() && complete ? kOk : kInvalid;
}

struct TrainArgs {
    Common common;
    std::string kind = "q";
    int episodes = 5000;
    int updates = 150;
    std::string out = "policy.json";
    std::string curve = "curve.csv";
};

int cmd_train(const TrainArgs& a) {
    auto inst = instance_of(a.common);
    const RewardConfig reward = reward_of(a.common);
    const Features features = features_of(a.common);
    std::unique_ptr<Policy> policy;
    std::vector<CurvePoint> curve;
    if (a.kind == "q") {
        QHyperparams hp;
        hp.episodes = a.episodes;
        hp.seed = a.common.seed;
        hp.reward = reward;
        hp.features = features;
        auto res = train_q(inst, hp);
        curve = std::move(res.curve);
        policy = std::make_unique<TabularQPolicy>(std::move(res.policy));
    } else {
        PgHyperparams hp;
        hp.max_updates = a.updates;
        hp.seed = a.common.seed;
        hp.reward = reward;
        hp.features = features;
        auto res = train_pg({inst}, hp);
        curve = std::move(res.curve);
        policy = std::make_unique<NeuralPolicy>(std::move(res.policy));
    }
    emit(a.out, policy_to_json(*policy, features).dump() + "\n");
    emit(a.curve, curve_to_csv(curve));
    const auto eval = rollout(inst, reward, features, *policy, a.common.seed, ActMode::Greedy);
    std::cout << "trained " << policy->name() << " over " << curve.size() << " episodes; greedy makespan "
              << format_number(eval.kpis.makespan) << "\n";
    return kOk;
}

struct EvaluateArgs {
    Common common;
    std::vector<std::string> policies{"fcfs", "edd", "spt", "lpt", "random"};
    int runs = 100;
    bool csv = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
    auto inst = instance_of(a.common);
    const RewardConfig reward = reward_of(a.common);
    const Features features = features_of(a.common);
    std::printf("%-12s %6s %10s %10s %10s %12s %10s\n", "policy", "runs", "mean_mk", "min_mk", "max_mk", "mean_tardy",
                "complete");
    std::string csv = "policy,runs,mean_makespan,min_makespan,max_makespan,mean_tardiness,complete\n";
    for (const auto& spec : a.policies) {
        auto policy = load_policy(spec);
        double sum = 0, lo = 0, hi = 0, tardy = 0;
        int complete = 0;
        for (int r = 0; r < a.runs; ++r) {
            const auto res = rollout(inst, reward, features, *policy, a.common.seed + static_cast<std::uint64_t>(r));
            const double mk = res.kpis.makespan;
            sum += mk;
            tardy += res.kpis.total_tardiness;
            lo = r == 0 ? mk : std::min(lo, mk);
            hi = r == 0 ? mk : std::max(hi, mk);
            complete += res.deadlocked ? 0 : 1;
        }
        const double n = a.runs;
        std::printf("%-12s %6d %10s %10s %10s %12s %10d\n", policy->name().c_str(), a.runs, format_number(sum / n).c_str(),
                    format_number(lo).c_str(), format_number(hi).c_str(), format_number(tardy / n).c_str(), complete);
        csv += policy->name() + "," + std::to_string(a.runs) + "," + format_number(sum / n) + "," + format_number(lo) +
               "," + format_number(hi) + "," + format_number(tardy / n) + "," + std::to_string(complete) + "\n";
    }
    if (a.csv) std::cout << "\n" << csv;
    return kOk;
}

struct GanttArgs {
    Common common;
    std::string schedule;
    std::string format = "svg";
    std::string out;
};

int cmd_gantt(const GanttArgs& a) {
    const Instance inst = load_instance(a.common.instance);
    const Schedule s = schedule_from_json(json::parse(read_file(a.schedule)));
    emit(a.out, render_gantt(inst, s, a.format == "text" ? GanttFormat::Text : GanttFormat::Svg));
    return kOk;
}

struct ServeArgs {
    ServiceConfig config;
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct ReplayArgs {
    Common common;
    std::string trajectory;
};

int cmd_replay(const ReplayArgs& a) {
    auto inst = instance_of(a.common);
    const std::string recorded = read_file(a.trajectory);
    auto [header, actions] = trajectory_actions_from_jsonl(recorded);
    if (header.instance_hash != instance_hash(*inst)) {
        std::cerr << "trajectory was recorded on instance " << header.instance_hash << ", not " << instance_hash(*inst)
                  << "\n";
        return kInvalid;
    }
    auto res = replay_actions(inst, header.reward, header.features, actions);
    Environment env(inst, header.reward, header.features);
    const std::string again = trajectory_to_jsonl(header, res.trajectory, env.action_space());
    if (again != recorded) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(again.size(), recorded.size()) && again[i] == recorded[i]; ++i)
            line += recorded[i] == '\n';
        std::cerr << "replay diverges from the recorded log at line " << line << "\n";
        return kInvalid;
    }
    std::cout << "replayed " << actions.size() << " steps, observations identical, makespan "
              << format_number(res.kpis.makespan) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Job-shop scheduling with buffers: simulation, heuristics, exact search and learning"};
    app.require_subcommand(1);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "check an instance, and optionally a schedule against it");
    add_common(validate, va.common, false);
    validate->add_option("-s,--schedule", va.schedule, "schedule JSON to validate")->check(CLI::ExistingFile);

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "write a random instance");
    generate->add_option("--seed", ga.spec.seed)->capture_default_str();
    generate->add_option("--jobs", ga.spec.jobs.lo, "number of jobs")->capture_default_str();
    generate->add_option("--machines", ga.spec.machines.lo, "number of machines")->capture_default_str();
    generate->add_option("-o,--out", ga.out, "output file (stdout when omitted)");

    PlanArgs pa;
    auto* plan = app.add_subcommand("plan", "schedule an instance with one policy");
    add_common(plan, pa.common);
    plan->add_option("-p,--policy", pa.policy, "fcfs | edd | spt | lpt | random | exact | policy file")
        ->capture_default_str();
    plan->add_option("--schedule-out", pa.schedule_out)->capture_default_str();
    plan->add_option("--gantt-out", pa.gantt_out, "SVG path, empty to skip")->capture_default_str();
    plan->add_option("--trajectory-out", pa.trajectory_out, "JSONL trajectory log");
    plan->add_option("--node-limit", pa.node_limit, "exact search guard")->check(CLI::PositiveNumber);
    plan->add_flag("--csv", pa.csv, "print KPIs as CSV");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a Q-table or a policy network");
    add_common(train, ta.common);
    train->add_option("-k,--kind", ta.kind, "q | pg")->check(CLI::IsMember({"q", "pg"}))->capture_default_str();
    train->add_option("--episodes", ta.episodes, "Q-learning episodes")->check(CLI::PositiveNumber);
    train->add_option("--updates", ta.updates, "policy-gradient updates")->check(CLI::PositiveNumber);
    train->add_option("-o,--out", ta.out)->capture_default_str();
    train->add_option("--curve", ta.curve)->capture_default_str();

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "compare policies over seeded rollouts");
    add_common(evaluate, ea.common);
    evaluate->add_option("-p,--policy", ea.policies, "policy names or files")->capture_default_str();
    evaluate->add_option("-n,--runs", ea.runs)->check(CLI::PositiveNumber)->capture_default_str();
    evaluate->add_flag("--csv", ea.csv);

    GanttArgs gna;
    auto* gantt = app.add_subcommand("gantt", "render a schedule");
    add_common(gantt, gna.common, false);
    gantt->add_option("-s,--schedule", gna.schedule)->required()->check(CLI::ExistingFile);
    gantt->add_option("-f,--format", gna.format)->check(CLI::IsMember({"svg", "text"}))->capture_default_str();
    gantt->add_option("-o,--out", gna.out);

    ServeArgs sa;
    auto* serve = app.add_subcommand("serve", "run the planning service");
    serve->add_option("--host", sa.host)->capture_default_str();
    serve->add_option("--port", sa.port)->check(CLI::Range(1, 65535))->capture_default_str();
    serve->add_option("--data-dir", sa.config.data_dir, "persistent store, in memory when omitted");
    serve->add_option("--workers", sa.config.workers)->check(CLI::PositiveNumber)->capture_default_str();
    serve->add_option("--exact-budget", sa.config.exact_budget_seconds, "seconds per EXACT candidate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    serve->add_option("--exact-max-ops", sa.config.exact_max_operations, "largest instance EXACT accepts")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    ReplayArgs ra;
    auto* replay = app.add_subcommand("replay", "re-run a trajectory log and check it is reproduced exactly");
    add_common(replay, ra.common, false);
    replay->add_option("-t,--trajectory", ra.trajectory)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    ga.spec.jobs.hi = ga.spec.jobs.lo;
    ga.spec.machines.hi = ga.spec.machines.lo;

    try {
        if (*validate) return cmd_validate(va);
        if (*generate) return cmd_generate(ga);
        if (*plan) return cmd_plan(pa);
        if (*train) return cmd_train(ta);
        if (*evaluate) return cmd_evaluate(ea);
        if (*gantt) return cmd_gantt(gna);
        if (*serve) return run_server(sa.config, sa.host, sa.port);
        if (*replay) return cmd_replay(ra);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const InstanceError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const ScheduleError& e) {
        std::cerr << "invalid schedule: " << e.what() << "\n";
        return kInvalid;
    } catch (const json::exception& e) {
        std::cerr << "invalid JSON: " << e.what() << "\n";
        return kInvalid;
    } catch (const GuardExceeded& e) {
        std::cerr << "guard exceeded: " << e.what() << "\n";
        return kGuard;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
