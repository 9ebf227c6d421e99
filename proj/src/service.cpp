#include "jobshop/service.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <httplib.h>

#include "jobshop/exact.hpp"
#include "jobshop/neural.hpp"
#include "jobshop/qlearning.hpp"

namespace jobshop {

namespace fs = std::filesystem;

// ---- worker pool -----------------------------------------------------------

WorkerPool::WorkerPool(int workers, std::size_t max_queue) : max_queue_(max_queue) {
    if (workers < 1) throw DomainError("worker count must be positive");
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { run(); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
        queue_.clear();
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
}

bool WorkerPool::submit(std::function<void()> task) {
    {
        std::lock_guard lock(mutex_);
        if (stopping_ || queue_.size() >= max_queue_) return false;
        queue_.push_back(std::move(task));
    }
    wake_.notify_one();
    return true;
}

void WorkerPool::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

void WorkerPool::run() {
    for (;;) {
        std::function<void()> task;
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            task = std::move(queue_.front());
            queue_.pop_front();
            ++running_;
        }
        task();
        {
            std::lock_guard lock(mutex_);
            --running_;
        }
        idle_.notify_all();
    }
}

// ---- replan replay ---------------------------------------------------------

Environment replay_frozen(std::shared_ptr<const Instance> instance, const RewardConfig& config, const Features& features,
                          const Schedule& base, Minutes clock) {
    Environment env(std::move(instance), config, features);
    const int noop = env.action_space().noop_index();
    for (const auto& iv : base.intervals) {
        const bool handoff = iv.kind == IntervalKind::Process && iv.op_index > 0;
        if (!(time_lt(iv.transport_start, clock) || (handoff && time_eq(iv.transport_start, clock)))) continue;
        while (time_lt(env.state().clock, iv.transport_start) && !env.state().done) {
            if (!env.mask()[noop]) break;
            env.step(noop);
        }
        if (!time_eq(env.state().clock, iv.transport_start))
            throw DomainError("base schedule dispatch at t=" + format_number(iv.transport_start) +
                              " is not a decision epoch");
        const Action a = iv.kind == IntervalKind::Process ? Action::assign(iv.job) : Action::presetup(iv.machine, iv.setup_to);
        if (a.kind == ActionKind::Assign && env.state().jobs[iv.job].next_op_index != iv.op_index)
            throw DomainError("base schedule is out of operation order");
        if (!env.eligible(a)) throw DomainError("base schedule cannot be replayed: " + to_string(a) + " is masked");
        env.step(a);
    }
    while (!env.state().done && !env.state().events.empty() && time_le(env.state().events.front().time, clock))
        env.step(noop);
    return env;
}

// ---- helpers ---------------------------------------------------------------

namespace {

ApiResponse error(int status, const std::string& message, json extra = json::object()) {
    extra["error"] = message;
    extra["api_version"] = kApiVersion;
    ApiResponse r;
    r.status = status;
    r.body = std::move(extra);
    return r;
}

ApiResponse ok(int status, json body) {
    body["api_version"] = kApiVersion;
    ApiResponse r;
    r.status = status;
    r.body = std::move(body);
    return r;
}

enum class CandidateKind { Heuristic, Trained, Exact };

struct PolicyRequest {
    CandidateKind kind = CandidateKind::Heuristic;
    PolicyKind heuristic = PolicyKind::Edd;
    int trained_id = 0;
    std::string label;
    std::shared_ptr<const Policy> trained;
};

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

// "EDD", "TRAINED(3)", "TRAINED:3", {"kind": "TRAINED", "id": 3}, "EXACT"
std::optional<PolicyRequest> parse_policy_entry(const json& entry, std::string& why) {
    PolicyRequest req;
    std::string name;
    std::optional<int> id;
    if (entry.is_string()) {
        name = upper(entry.get<std::string>());
        const auto open = name.find_first_of("(:");
        if (open != std::string::npos) {
            std::string digits = name.substr(open + 1);
            if (!digits.empty() && digits.back() == ')') digits.pop_back();
            name = name.substr(0, open);
            try {
                std::size_t used = 0;
                id = std::stoi(digits, &used);
                if (used != digits.size()) throw std::invalid_argument(digits);
            } catch (const std::exception&) {
                why = "malformed policy id in \"" + entry.get<std::string>() + "\"";
                return std::nullopt;
            }
        }
    } else if (entry.is_object() && entry.contains("kind") && entry["kind"].is_string()) {
        name = upper(entry["kind"].get<std::string>());
        if (entry.contains("id")) {
            if (!entry["id"].is_number_integer()) {
                why = "policy id must be an integer";
                return std::nullopt;
            }
            id = entry["id"].get<int>();
        }
    } else {
        why = "policy entries must be names or {kind, id} objects";
        return std::nullopt;
    }
    if (name == "TRAINED") {
        if (!id) {
            why = "TRAINED needs a policy id";
            return std::nullopt;
        }
        req.kind = CandidateKind::Trained;
        req.trained_id = *id;
        req.label = "TRAINED(" + std::to_string(*id) + ")";
        return req;
    }
    if (name == "EXACT") {
        req.kind = CandidateKind::Exact;
        req.label = "EXACT";
        return req;
    }
    const auto kind = parse_policy_kind(name);
    if (!kind || *kind == PolicyKind::TabularQ || *kind == PolicyKind::Neural) {
        why = "unknown policy \"" + name + "\"";
        return std::nullopt;
    }
    req.heuristic = *kind;
    req.label = to_string(*kind);
    return req;
}

struct Goal {
    RewardConfig reward;
    Objective objective = Objective::Makespan;
    json doc;
};

std::optional<Goal> parse_goal(const json& request, std::string& why) {
    Goal goal;
    goal.reward = RewardConfig::makespan_only();
    goal.doc = "MAKESPAN";
    if (!request.contains("goal")) return goal;
    const json& g = request["goal"];
    std::string kind;
    const json* weights = nullptr;
    if (g.is_string()) {
        kind = upper(g.get<std::string>());
    } else if (g.is_object() && g.contains("kind") && g["kind"].is_string()) {
        kind = upper(g["kind"].get<std::string>());
        if (g.contains("weights")) weights = &g["weights"];
    } else if (g.is_object() && g.size() == 1 && g.contains("BALANCED")) {
        kind = "BALANCED";
        weights = &g["BALANCED"];
    } else {
        why = "goal must be MAKESPAN, TARDINESS or BALANCED";
        return std::nullopt;
    }
    if (kind == "MAKESPAN") return goal;
    if (kind == "TARDINESS") {
        goal.reward = reward_for_goal("tardiness");
        goal.objective = Objective::TotalTardiness;
        goal.doc = "TARDINESS";
        return goal;
    }
    if (kind == "BALANCED") {
        try {
            goal.reward = weights ? reward_from_json(*weights) : RewardConfig{};
        } catch (const std::exception& e) {
            why = std::string("bad goal weights: ") + e.what();
            return std::nullopt;
        }
        goal.doc = {{"kind", "BALANCED"}, {"weights", reward_to_json(goal.reward)}};
        return goal;
    }
    why = "unknown goal \"" + kind + "\"";
    return std::nullopt;
}

json instance_error_body(const InstanceError& e) { return {{"path", e.path()}, {"reason", e.what()}}; }

}  // namespace

struct PlanningService::Candidate {
    PolicyRequest request;
};

struct PlanningService::PlanJob {
    int id = 0;
    std::shared_ptr<const Instance> instance;
    Goal goal;
    std::uint64_t seed = 0;
    std::vector<PolicyRequest> policies;
    std::optional<Environment> start;  // replans start mid-episode
};

// ---- construction and persistence -----------------------------------------

PlanningService::PlanningService(ServiceConfig config)
    : config_(std::move(config)), pool_(config_.workers, config_.max_queue) {
    if (!config_.data_dir.empty()) {
        fs::create_directories(config_.data_dir);
        load();
    }
}

PlanningService::~PlanningService() = default;

void PlanningService::persist_locked() const {
    if (config_.data_dir.empty()) return;
    json store = {{"format", "jobshop-store"}, {"version", 1}, {"next_plan", next_plan_}, {"next_policy", next_policy_}};
    store["order_sets"] = order_sets_;
    store["tokens"] = tokens_;
    store["token_payloads"] = token_payloads_;
    json plans = json::object();
    for (const auto& [id, plan] : plans_) plans[std::to_string(id)] = *plan;
    store["plans"] = plans;
    json policies = json::object();
    for (const auto& [id, pol] : policies_) policies[std::to_string(id)] = *pol;
    store["policies"] = policies;
    const fs::path path = fs::path(config_.data_dir) / "store.json";
    const fs::path tmp = fs::path(config_.data_dir) / "store.json.tmp";
    write_file(tmp.string(), store.dump());
    fs::rename(tmp, path);
}

void PlanningService::load() {
    const fs::path path = fs::path(config_.data_dir) / "store.json";
    if (!fs::exists(path)) return;
    const json store = json::parse(read_file(path.string()));
    next_plan_ = store.value("next_plan", 1);
    next_policy_ = store.value("next_policy", 1);
    order_sets_ = store.value("order_sets", std::map<std::string, json>{});
    tokens_ = store.value("tokens", std::map<std::string, std::string>{});
    token_payloads_ = store.value("token_payloads", std::map<std::string, std::string>{});
    const json plans = store.value("plans", json::object());
    for (const auto& [key, plan] : plans.items()) {
        json p = plan;
        // work that was in flight when the store was written cannot resume
        if (p["status"] == "PENDING" || p["status"] == "RUNNING") {
            p["status"] = "FAILED";
            p["error"] = "interrupted by service restart";
        }
        plans_[std::stoi(key)] = std::make_shared<const json>(std::move(p));
    }
    const json policies = store.value("policies", json::object());
    for (const auto& [key, pol] : policies.items()) {
        json p = pol;
        if (p["status"] == "TRAINING") {
            p["status"] = "FAILED";
            p["error"] = "interrupted by service restart";
        }
        policies_[std::stoi(key)] = std::make_shared<const json>(std::move(p));
    }
}

void PlanningService::store_plan(int id, json plan) {
    std::lock_guard lock(mutex_);
    plans_[id] = std::make_shared<const json>(std::move(plan));
    persist_locked();
}

// ---- orders ----------------------------------------------------------------

ApiResponse PlanningService::submit_orders(const json& payload) {
    if (!payload.is_object()) return error(400, "payload must be an object");
    Instance inst;
    try {
        if (payload.contains("instance")) {
            inst = parse_instance(payload["instance"]);
        } else if (payload.contains("catalog") && payload.contains("orders")) {
            const auto orders = parse_orders(payload["orders"]);
            if (orders.empty()) return error(400, "order list is empty");
            inst = build_instance(parse_catalog(payload["catalog"]), orders, payload.value("name", "orders"));
        } else {
            return error(400, "expected \"instance\" or \"catalog\" + \"orders\"");
        }
    } catch (const InstanceError& e) {
        return error(400, "invalid order document", instance_error_body(e));
    } catch (const DomainError& e) {
        return error(400, e.what());
    }
    if (inst.job_count() == 0) return error(400, "order list is empty");

    const std::string id = instance_hash(inst);
    std::lock_guard lock(mutex_);
    if (payload.contains("client_token")) {
        if (!payload["client_token"].is_string()) return error(400, "client_token must be a string");
        const std::string token = payload["client_token"].get<std::string>();
        auto it = tokens_.find(token);
        if (it != tokens_.end()) {
            if (it->second != id) return error(409, "client_token was already used for a different payload");
            return ok(200, {{"order_set", id}, {"jobs", inst.job_count()}, {"duplicate", true}});
        }
        tokens_[token] = id;
        token_payloads_[token] = id;
    }
    const bool existed = order_sets_.count(id) > 0;
    order_sets_[id] = serialize_instance(inst);
    persist_locked();
    return ok(existed ? 200 : 201, {{"order_set", id}, {"jobs", inst.job_count()}, {"duplicate", existed}});
}

ApiResponse PlanningService::get_orders(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = order_sets_.find(id);
    if (it == order_sets_.end()) return error(404, "unknown order set " + id);
    return ok(200, {{"order_set", id}, {"instance", it->second}});
}

std::shared_ptr<const Instance> PlanningService::resolve_instance(const json& request, std::string& order_set,
                                                                  ApiResponse& err) const {
    try {
        if (request.contains("order_set")) {
            if (!request["order_set"].is_string()) {
                err = error(400, "order_set must be a string id");
                return nullptr;
            }
            order_set = request["order_set"].get<std::string>();
            std::lock_guard lock(mutex_);
            auto it = order_sets_.find(order_set);
            if (it == order_sets_.end()) {
                err = error(404, "unknown order set " + order_set);
                return nullptr;
            }
            return std::make_shared<const Instance>(parse_instance(it->second));
        }
        if (request.contains("instance")) {
            auto inst = std::make_shared<const Instance>(parse_instance(request["instance"]));
            order_set = instance_hash(*inst);
            return inst;
        }
    } catch (const InstanceError& e) {
        err = error(400, "invalid instance", instance_error_body(e));
        return nullptr;
    }
    err = error(400, "expected \"order_set\" or \"instance\"");
    return nullptr;
}

// ---- plans -----------------------------------------------------------------

ApiResponse PlanningService::create_plan(const json& request) {
    if (!request.is_object()) return error(400, "request must be an object");
    std::string order_set;
    ApiResponse err;
    auto inst = resolve_instance(request, order_set, err);
    if (!inst) return err;
    if (inst->job_count() == 0) return error(400, "order list is empty");

    std::string why;
    auto goal = parse_goal(request, why);
    if (!goal) return error(400, why);
    if (!request.contains("policies") || !request["policies"].is_array() || request["policies"].empty())
        return error(400, "at least one policy is required");
    std::uint64_t seed = 0;
    if (request.contains("seed")) {
        if (!request["seed"].is_number_integer() || request["seed"].get<std::int64_t>() < 0)
            return error(400, "seed must be a non-negative integer");
        seed = request["seed"].get<std::uint64_t>();
    }

    auto job = std::make_shared<PlanJob>();
    job->instance = inst;
    job->goal = *goal;
    job->seed = seed;
    for (const auto& entry : request["policies"]) {
        auto pr = parse_policy_entry(entry, why);
        if (!pr) return error(400, why);
        for (const auto& existing : job->policies)
            if (existing.label == pr->label) return error(400, "policy " + pr->label + " listed twice");
        if (pr->kind == CandidateKind::Exact && inst->op_total() > config_.exact_max_operations)
            return error(400, "EXACT refused: instance has " + std::to_string(inst->op_total()) +
                                  " operations, the exact-search size guard allows " +
                                  std::to_string(config_.exact_max_operations));
        if (pr->kind == CandidateKind::Trained) {
            std::shared_ptr<const json> record;
            {
                std::lock_guard lock(mutex_);
                auto it = policies_.find(pr->trained_id);
                if (it != policies_.end()) record = it->second;
            }
            if (!record) return error(404, "unknown policy id " + std::to_string(pr->trained_id));
            if ((*record)["status"] != "READY")
                return error(409, "policy " + std::to_string(pr->trained_id) + " is not ready");
            std::shared_ptr<const Policy> policy = policy_from_json((*record)["document"]);
            const auto reason = policy->incompatibility(*inst, Features{});
            if (!reason.empty()) return error(400, reason);
            pr->trained = std::move(policy);
        }
        job->policies.push_back(std::move(*pr));
    }

    {
        std::lock_guard lock(mutex_);
        order_sets_.emplace(order_set, serialize_instance(*inst));
    }
    json plan = {{"status", "PENDING"},
                 {"order_set", order_set},
                 {"instance_hash", order_set},
                 {"request", {{"goal", goal->doc}, {"seed", seed}, {"policies", json::array()}}},
                 {"progress", {{"done", 0}, {"total", job->policies.size()}}},
                 {"candidates", json::array()},
                 {"decisions", json::array()},
                 {"warnings", json::array()}};
    for (const auto& p : job->policies) plan["request"]["policies"].push_back(p.label);
    const int id = enqueue_plan(job, std::move(plan));
    if (id < 0) return error(503, "planning queue is full");
    return ok(202, {{"plan_id", id}, {"status", "PENDING"}});
}

int PlanningService::enqueue_plan(std::shared_ptr<PlanJob> job, json initial) {
    int id;
    {
        std::lock_guard lock(mutex_);
        id = next_plan_++;
        job->id = id;
        initial["plan_id"] = id;
        plans_[id] = std::make_shared<const json>(std::move(initial));
        persist_locked();
    }
    if (!pool_.submit([this, job] { run_plan(job); })) {
        std::lock_guard lock(mutex_);
        plans_.erase(id);
        persist_locked();
        return -1;
    }
    return id;
}

void PlanningService::run_plan(const std::shared_ptr<PlanJob>& job) {
    json plan;
    {
        std::lock_guard lock(mutex_);
        plan = *plans_.at(job->id);
    }
    plan["status"] = "RUNNING";
    store_plan(job->id, plan);

    const Instance& inst = *job->instance;
    Environment base = job->start ? *job->start : Environment(job->instance, job->goal.reward);
    int served = 0;
    for (const auto& pr : job->policies) {
        json cand = {{"policy", pr.label}};
        try {
            Schedule schedule;
            double total_reward = 0.0;
            bool deadlocked = false;
            if (pr.kind == CandidateKind::Exact) {
                ExactOptions opts;
                opts.node_limit = config_.exact_node_limit;
                opts.time_budget_seconds = config_.exact_budget_seconds;
                auto res = brute_force_optimal(base, job->goal.objective, opts);
                schedule = std::move(res.schedule);
                cand["optimal_value"] = res.value;
                cand["nodes"] = res.nodes;
            } else {
                Environment env = base;
                std::unique_ptr<Policy> heuristic;
                const Policy* policy = pr.trained.get();
                if (pr.kind == CandidateKind::Heuristic) {
                    heuristic = std::make_unique<HeuristicPolicy>(pr.heuristic);
                    policy = heuristic.get();
                }
                const ActMode mode = pr.kind == CandidateKind::Trained ? ActMode::Greedy : ActMode::Sample;
                auto res = rollout(env, *policy, job->seed, mode);
                schedule = std::move(res.schedule);
                total_reward = res.total_reward;
                deadlocked = res.deadlocked;
                cand["total_reward"] = total_reward;
            }
            const auto doc = schedule_to_json(inst, schedule, pr.label);
            if (!doc["violations"].empty()) {
                // never expose an infeasible schedule
                cand["status"] = "REJECTED";
                cand["violations"] = doc["violations"];
            } else {
                cand["status"] = deadlocked ? "DEADLOCK" : "OK";
                cand["schedule"] = doc;
                cand["kpis"] = doc["kpis"];
                cand["gantt"] = "/plans/" + std::to_string(job->id) + "/gantt.svg?policy=" + pr.label;
                if (!deadlocked) ++served;
            }
        } catch (const GuardExceeded& e) {
            cand["status"] = "GUARD_EXCEEDED";
            cand["error"] = e.what();
        } catch (const std::exception& e) {
            cand["status"] = "ERROR";
            cand["error"] = e.what();
        }
        plan["candidates"].push_back(std::move(cand));
        plan["progress"]["done"] = plan["candidates"].size();
        store_plan(job->id, plan);
    }
    const bool nothing_left = job->start && job->start->state().done;
    plan["status"] = served > 0 || nothing_left ? "DRAFT" : "FAILED";
    if (plan["status"] == "FAILED") plan["error"] = "no candidate produced a complete schedule";
    store_plan(job->id, plan);
}

ApiResponse PlanningService::get_plan(int id) const {
    std::shared_ptr<const json> plan;
    {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(id);
        if (it == plans_.end()) return error(404, "unknown plan " + std::to_string(id));
        plan = it->second;
    }
    return ok(200, *plan);
}

ApiResponse PlanningService::decide(int id, const json& decision) {
    if (!decision.is_object() || !decision.contains("decision") || !decision["decision"].is_string())
        return error(400, "expected {\"decision\": \"ACCEPT\" | \"OVERRIDE\", ...}");
    const std::string kind = upper(decision["decision"].get<std::string>());

    // One writer per plan: the whole read-check-write runs under the lock.
    std::lock_guard lock(mutex_);
    auto it = plans_.find(id);
    if (it == plans_.end()) return error(404, "unknown plan " + std::to_string(id));
    json plan = *it->second;
    if (plan["status"] != "DRAFT")
        return error(409, "plan " + std::to_string(id) + " is " + plan["status"].get<std::string>() +
                              "; decisions need a DRAFT plan");
    json record = {{"seq", plan["decisions"].size() + 1}, {"decision", kind}};

    if (kind == "ACCEPT") {
        if (!decision.contains("policy") || !decision["policy"].is_string())
            return error(400, "ACCEPT needs the policy label to accept");
        const std::string label = decision["policy"].get<std::string>();
        const auto& cands = plan["candidates"];
        auto c = std::find_if(cands.begin(), cands.end(), [&](const json& x) { return x["policy"] == label; });
        if (c == cands.end() || (*c)["status"] != "OK")
            return error(400, "no complete candidate schedule for policy " + label);
        record["policy"] = label;
        record["outcome"] = "ACCEPTED";
        plan["status"] = "ACCEPTED";
        plan["selected"] = label;
    } else if (kind == "OVERRIDE") {
        if (!decision.contains("schedule")) return error(400, "OVERRIDE needs the edited schedule");
        const Instance inst = parse_instance(order_sets_.at(plan["order_set"].get<std::string>()));
        Schedule edited;
        std::vector<Violation> violations;
        try {
            edited = schedule_from_json(decision["schedule"]);
            violations = validate_schedule(inst, edited);
        } catch (const InstanceError& e) {
            return error(400, "malformed schedule", instance_error_body(e));
        } catch (const ScheduleError& e) {
            return error(400, e.what());
        }
        bool complete = true;
        for (const auto& c : edited.completion) complete = complete && c.has_value();
        if (violations.empty() && !complete)
            return error(422, "override must complete every job");
        if (!violations.empty()) {
            record["outcome"] = "REJECTED";
            record["violations"] = violations_to_json(violations);
            plan["decisions"].push_back(record);
            plans_[id] = std::make_shared<const json>(plan);
            persist_locked();
            return error(422, "edited schedule violates constraints", {{"violations", violations_to_json(violations)}});
        }
        const std::string label = "OVERRIDE";
        json cand = {{"policy", label}, {"status", "OK"}};
        cand["schedule"] = schedule_to_json(inst, edited, label);
        cand["kpis"] = cand["schedule"]["kpis"];
        cand["gantt"] = "/plans/" + std::to_string(id) + "/gantt.svg?policy=" + label;
        plan["candidates"].push_back(cand);
        record["policy"] = label;
        record["outcome"] = "OVERRIDDEN";
        record["kpis"] = cand["kpis"];
        plan["status"] = "OVERRIDDEN";
        plan["selected"] = label;
    } else {
        return error(400, "decision must be ACCEPT or OVERRIDE");
    }
    plan["decisions"].push_back(record);
    plans_[id] = std::make_shared<const json>(plan);
    persist_locked();
    return ok(200, plan);
}

ApiResponse PlanningService::replan(int id, const json& event) {
    if (!event.is_object() || !event.contains("clock") || !event["clock"].is_number())
        return error(400, "replan event needs a numeric \"clock\"");
    const Minutes clock = event["clock"].get<double>();
    if (!std::isfinite(clock) || clock < 0.0) return error(400, "clock must be a non-negative number");

    json plan;
    {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(id);
        if (it == plans_.end()) return error(404, "unknown plan " + std::to_string(id));
        plan = *it->second;
    }
    const std::string status = plan["status"];
    if (status == "PENDING" || status == "RUNNING") return error(409, "plan " + std::to_string(id) + " is still running");

    std::string base_label;
    if (event.contains("base_policy")) {
        if (!event["base_policy"].is_string()) return error(400, "base_policy must be a label");
        base_label = event["base_policy"].get<std::string>();
    } else if (plan.contains("selected")) {
        base_label = plan["selected"].get<std::string>();
    } else {
        for (const auto& c : plan["candidates"])
            if (c["status"] == "OK") {
                base_label = c["policy"].get<std::string>();
                break;
            }
    }
    const json* base_doc = nullptr;
    for (const auto& c : plan["candidates"])
        if (c["policy"] == base_label && c.contains("schedule")) base_doc = &c["schedule"];
    if (!base_doc) return error(400, "plan has no schedule to replan from");

    json request = plan["request"];
    request["order_set"] = plan["order_set"];
    if (event.contains("policies")) request["policies"] = event["policies"];
    if (event.contains("seed")) request["seed"] = event["seed"];

    std::string order_set;
    ApiResponse err;
    auto inst = resolve_instance(request, order_set, err);
    if (!inst) return err;
    std::string why;
    auto goal = parse_goal(request, why);
    if (!goal) return error(400, why);

    auto job = std::make_shared<PlanJob>();
    job->instance = inst;
    job->goal = *goal;
    job->seed = request.value("seed", std::uint64_t{0});
    try {
        job->start.emplace(replay_frozen(inst, goal->reward, Features{}, schedule_from_json(*base_doc), clock));
    } catch (const std::exception& e) {
        return error(422, std::string("cannot replay base schedule: ") + e.what());
    }
    const Environment& start = *job->start;

    json warnings = json::array();
    if (start.state().done) {
        warnings.push_back("clock " + format_number(clock) + " is at or past the makespan; nothing left to plan");
    } else {
        for (const auto& entry : request["policies"]) {
            auto pr = parse_policy_entry(entry, why);
            if (!pr) return error(400, why);
            if (pr->kind == CandidateKind::Exact && inst->op_total() > config_.exact_max_operations)
                return error(400, "EXACT refused: instance exceeds the exact-search size guard");
            if (pr->kind == CandidateKind::Trained) {
                std::lock_guard lock(mutex_);
                auto it = policies_.find(pr->trained_id);
                if (it == policies_.end() || (*it->second)["status"] != "READY")
                    return error(404, "unknown or unfinished policy id " + std::to_string(pr->trained_id));
                pr->trained = policy_from_json((*it->second)["document"]);
            }
            job->policies.push_back(std::move(*pr));
        }
    }

    json frozen = json::array();
    for (const auto& iv : start.schedule().intervals)
        frozen.push_back({{"job", iv.job}, {"op_index", iv.op_index}, {"machine", iv.machine}, {"end", iv.end}});
    json next = {{"status", "PENDING"},
                 {"order_set", order_set},
                 {"instance_hash", order_set},
                 {"request", request},
                 {"parent_plan", id},
                 {"replan_clock", clock},
                 {"base_policy", base_label},
                 {"start_state",
                  {{"clock", start.state().clock}, {"observation", observation_to_json(start.observe())}, {"frozen", frozen}}},
                 {"progress", {{"done", 0}, {"total", job->policies.size()}}},
                 {"candidates", json::array()},
                 {"decisions", json::array()},
                 {"warnings", warnings}};
    next["request"].erase("order_set");
    json labels = json::array();
    for (const auto& p : job->policies) labels.push_back(p.label);
    next["request"]["policies"] = labels;
    const int new_id = enqueue_plan(job, std::move(next));
    if (new_id < 0) return error(503, "planning queue is full");
    return ok(202, {{"plan_id", new_id}, {"parent_plan", id}, {"status", "PENDING"}, {"warnings", warnings}});
}

ApiResponse PlanningService::gantt(int id, const std::string& policy) const {
    std::shared_ptr<const json> plan;
    json instance_doc;
    {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(id);
        if (it == plans_.end()) return error(404, "unknown plan " + std::to_string(id));
        plan = it->second;
        instance_doc = order_sets_.at((*plan)["order_set"].get<std::string>());
    }
    std::string label = policy;
    if (label.empty()) label = plan->value("selected", std::string{});
    for (const auto& c : (*plan)["candidates"]) {
        if (!c.contains("schedule")) continue;
        if (!label.empty() && c["policy"] != label) continue;
        ApiResponse r;
        r.content_type = "image/svg+xml";
        r.raw = render_gantt(parse_instance(instance_doc), schedule_from_json(c["schedule"]), GanttFormat::Svg);
        return r;
    }
    return error(404, "plan " + std::to_string(id) + " has no schedule" + (label.empty() ? "" : " for " + label));
}

// ---- policies --------------------------------------------------------------

namespace {

json public_policy(const json& record) {
    json out = record;
    out.erase("document");
    return out;
}

}  // namespace

ApiResponse PlanningService::list_policies() const {
    json list = json::array();
    std::lock_guard lock(mutex_);
    for (const auto& [id, rec] : policies_) list.push_back(public_policy(*rec));
    return ok(200, {{"policies", list}, {"heuristics", {"FCFS", "EDD", "SPT", "LPT", "RANDOM"}}, {"exact", "EXACT"}});
}

ApiResponse PlanningService::get_policy(int id) const {
    std::lock_guard lock(mutex_);
    auto it = policies_.find(id);
    if (it == policies_.end()) return error(404, "unknown policy " + std::to_string(id));
    return ok(200, public_policy(*it->second));
}

ApiResponse PlanningService::train_policy(const json& request) {
    if (!request.is_object()) return error(400, "request must be an object");
    std::string order_set;
    ApiResponse err;
    auto inst = resolve_instance(request, order_set, err);
    if (!inst) return err;
    if (inst->job_count() == 0) return error(400, "order list is empty");
    const std::string kind_name = upper(request.value("kind", std::string("Q")));
    const auto kind = parse_policy_kind(kind_name);
    if (!kind || (*kind != PolicyKind::TabularQ && *kind != PolicyKind::Neural))
        return error(400, "kind must be Q or PG");
    std::string why;
    auto goal = parse_goal(request, why);
    if (!goal) return error(400, why);
    const auto seed = request.value("seed", std::uint64_t{0});

    QHyperparams qhp;
    PgHyperparams pghp;
    json hp_doc;
    try {
        if (*kind == PolicyKind::TabularQ) {
            qhp.seed = seed;
            qhp.reward = goal->reward;
            qhp.episodes = request.value("episodes", qhp.episodes);
            qhp.validate();
            hp_doc = {{"episodes", qhp.episodes}, {"alpha", qhp.alpha}, {"gamma", qhp.gamma}, {"seed", seed}};
        } else {
            pghp.seed = seed;
            pghp.reward = goal->reward;
            pghp.max_updates = request.value("updates", pghp.max_updates);
            pghp.validate();
            hp_doc = {{"updates", pghp.max_updates}, {"learning_rate", pghp.learning_rate}, {"seed", seed}};
        }
    } catch (const std::exception& e) {
        return error(400, e.what());
    }

    int id;
    {
        std::lock_guard lock(mutex_);
        order_sets_.emplace(order_set, serialize_instance(*inst));
        id = next_policy_++;
        json record = {{"policy_id", id},
                       {"kind", to_string(*kind)},
                       {"status", "TRAINING"},
                       {"instance_hash", order_set},
                       {"shape", {{"jobs", inst->job_count()}, {"machines", inst->machine_count()}}},
                       {"goal", goal->doc},
                       {"hyperparams", hp_doc}};
        policies_[id] = std::make_shared<const json>(std::move(record));
        persist_locked();
    }
    const PolicyKind k = *kind;
    const bool queued = pool_.submit([this, id, inst, k, qhp, pghp] {
        json record;
        {
            std::lock_guard lock(mutex_);
            record = *policies_.at(id);
        }
        try {
            std::vector<CurvePoint> curve;
            if (k == PolicyKind::TabularQ) {
                auto res = train_q(inst, qhp);
                record["document"] = policy_to_json(res.policy, qhp.features);
                curve = std::move(res.curve);
            } else {
                auto res = train_pg({inst}, pghp);
                record["document"] = policy_to_json(res.policy, pghp.features);
                curve = std::move(res.curve);
            }
            const auto eval = rollout(inst, RewardConfig::makespan_only(), Features{},
                                      *policy_from_json(record["document"]), 0, ActMode::Greedy);
            record["greedy_makespan"] = eval.kpis.makespan;
            record["episodes"] = curve.size();
            record["status"] = "READY";
        } catch (const std::exception& e) {
            record["status"] = "FAILED";
            record["error"] = e.what();
        }
        std::lock_guard lock(mutex_);
        policies_[id] = std::make_shared<const json>(std::move(record));
        persist_locked();
    });
    if (!queued) {
        std::lock_guard lock(mutex_);
        policies_.erase(id);
        persist_locked();
        return error(503, "training queue is full");
    }
    return ok(202, {{"policy_id", id}, {"status", "TRAINING"}});
}

// ---- HTTP ------------------------------------------------------------------

void PlanningService::install(httplib::Server& server) {
    auto send = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.payload(), r.content_type);
    };
    // Parses the body, maps exceptions to 4xx/5xx.
    auto with_body = [send](std::function<ApiResponse(const json&, const httplib::Request&)> handler) {
        return [send, handler](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = req.body.empty() ? json::object() : json::parse(req.body);
            } catch (const json::parse_error& e) {
                send(res, error(400, std::string("malformed JSON: ") + e.what()));
                return;
            }
            try {
                send(res, handler(body, req));
            } catch (const std::exception& e) {
                send(res, error(500, e.what()));
            }
        };
    };
    auto plan_id = [](const httplib::Request& req) { return std::stoi(req.matches[1]); };

    for (const std::string prefix : {"", "/v1"}) {
        server.Get(prefix + "/health", [send](const httplib::Request&, httplib::Response& res) {
            send(res, ok(200, {{"status", "ok"}}));
        });
        server.Post(prefix + "/orders", with_body([this](const json& b, const httplib::Request&) { return submit_orders(b); }));
        server.Get(prefix + R"(/orders/([0-9a-f]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_orders(req.matches[1]));
        });
        server.Post(prefix + "/plans", with_body([this](const json& b, const httplib::Request&) { return create_plan(b); }));
        server.Get(prefix + R"(/plans/(\d+))", [this, send, plan_id](const httplib::Request& req, httplib::Response& res) {
            send(res, get_plan(plan_id(req)));
        });
        server.Post(prefix + R"(/plans/(\d+)/decision)",
                    with_body([this, plan_id](const json& b, const httplib::Request& req) { return decide(plan_id(req), b); }));
        server.Post(prefix + R"(/plans/(\d+)/replan)",
                    with_body([this, plan_id](const json& b, const httplib::Request& req) { return replan(plan_id(req), b); }));
        server.Get(prefix + R"(/plans/(\d+)/gantt\.svg)",
                   [this, send, plan_id](const httplib::Request& req, httplib::Response& res) {
                       send(res, gantt(plan_id(req), req.get_param_value("policy")));
                   });
        server.Get(prefix + "/policies", [this, send](const httplib::Request&, httplib::Response& res) {
            send(res, list_policies());
        });
        server.Get(prefix + R"(/policies/(\d+))", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_policy(std::stoi(req.matches[1])));
        });
        server.Post(prefix + "/policies/train",
                    with_body([this](const json& b, const httplib::Request&) { return train_policy(b); }));
    }
}

int run_server(const ServiceConfig& config, const std::string& host, int port) {
    PlanningService service(config);
    httplib::Server server;
    service.install(server);
    std::fprintf(stderr, "listening on %s:%d (data dir: %s)\n", host.c_str(), port,
                 config.data_dir.empty() ? "<memory>" : config.data_dir.c_str());
    return server.listen(host, port) ? 0 : 1;
}

}  // namespace jobshop
