#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "jobshop/io.hpp"

namespace httplib {
class Server;
}

namespace jobshop {

inline constexpr int kApiVersion = 1;

struct ServiceConfig {
    std::string data_dir;  // empty: keep everything in memory
    int workers = 2;
    std::size_t max_queue = 64;
    double exact_budget_seconds = 30.0;
    std::int64_t exact_node_limit = 10'000'000;
    int exact_max_operations = 12;  // EXACT requests above this are refused up front
};

// Fixed-size thread pool with a bounded queue.
class WorkerPool {
public:
    WorkerPool(int workers, std::size_t max_queue);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    // False when the queue is full.
    bool submit(std::function<void()> task);
    // Blocks until the queue is empty and no task is running.
    void wait_idle();

private:
    void run();

    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable idle_;
    std::deque<std::function<void()>> queue_;
    std::vector<std::thread> threads_;
    std::size_t max_queue_;
    int running_ = 0;
    bool stopping_ = false;
};

struct ApiResponse {
    int status = 200;
    json body;
    std::string content_type = "application/json";
    std::string raw;  // used instead of body when non-empty

    std::string payload() const { return raw.empty() ? body.dump() : raw; }
};

// Replan freeze rule: every operation dispatched before `clock`, plus
// hand-offs of already started jobs dispatched exactly at `clock`, are kept;
// everything else is planned again. Returns the environment positioned at the
// latest decision epoch not after `clock`.
Environment replay_frozen(std::shared_ptr<const Instance> instance, const RewardConfig& config, const Features& features,
                          const Schedule& base, Minutes clock);

// Episodic planning service. Handlers are transport independent; install()
// maps them onto HTTP routes. Plans and policies are immutable JSON snapshots
// replaced under one lock, so readers never see a half-written plan.
class PlanningService {
public:
    explicit PlanningService(ServiceConfig config);
    ~PlanningService();

    ApiResponse submit_orders(const json& payload);
    ApiResponse get_orders(const std::string& id) const;
    ApiResponse create_plan(const json& request);
    ApiResponse get_plan(int id) const;
    ApiResponse decide(int id, const json& decision);
    ApiResponse replan(int id, const json& event);
    ApiResponse gantt(int id, const std::string& policy) const;
    ApiResponse list_policies() const;
    ApiResponse get_policy(int id) const;
    ApiResponse train_policy(const json& request);

    void install(httplib::Server& server);
    void wait_idle() { pool_.wait_idle(); }

private:
    struct Candidate;
    struct PlanJob;

    std::shared_ptr<const Instance> resolve_instance(const json& request, std::string& order_set, ApiResponse& error) const;
    void run_plan(const std::shared_ptr<PlanJob>& job);
    int enqueue_plan(std::shared_ptr<PlanJob> job, json initial);
    void store_plan(int id, json plan);
    void persist_locked() const;
    void load();

    ServiceConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, json> order_sets_;      // content hash -> instance document
    std::map<std::string, std::string> tokens_;   // client token -> order set id
    std::map<std::string, std::string> token_payloads_;
    std::map<int, std::shared_ptr<const json>> plans_;
    std::map<int, std::shared_ptr<const json>> policies_;
    int next_plan_ = 1;
    int next_policy_ = 1;
    WorkerPool pool_;
};

// Blocking HTTP server on host:port until the process is stopped.
int run_server(const ServiceConfig& config, const std::string& host, int port);

}  // namespace jobshop
