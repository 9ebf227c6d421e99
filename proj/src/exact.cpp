#include "jobshop/exact.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unordered_map>

#include "jobshop/keys.hpp"

namespace jobshop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Searcher {
public:
    Searcher(Objective objective, const ExactOptions& options) : objective_(objective), options_(options) {
        if (options.time_budget_seconds)
            deadline_ = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(*options.time_budget_seconds));
    }

    double solve(const Environment& env) {
        if (env.state().done) return env.state().deadlocked ? kInf : 0.0;
        auto key = env.canonical_key(objective_ == Objective::TotalTardiness);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second.value;

        if (++nodes_ > options_.node_limit)
            throw GuardExceeded("instance too large for exact search (node limit " +
                                std::to_string(options_.node_limit) + " reached)");
        if (deadline_ && (nodes_ & 1023) == 0 && std::chrono::steady_clock::now() > *deadline_)
            throw GuardExceeded("instance too large for exact search (time budget exhausted)");

        double best = kInf;
        int best_action = -1;
        const auto& mask = env.mask();
        const int last = env.action_space().noop_index();
        for (int a = 0; a <= last; ++a) {
            if (!mask[a]) continue;
            Environment child = env;
            const double cost = step_cost(child, a);
            const double value = cost + solve(child);
            if (value < best - kTimeEps) {
                best = value;
                best_action = a;
            }
        }
        memo_.emplace(std::move(key), Entry{best, best_action});
        return best;
    }

    int best_action(const Environment& env) const {
        auto it = memo_.find(env.canonical_key(objective_ == Objective::TotalTardiness));
        return it == memo_.end() ? -1 : it->second.action;
    }

    std::int64_t nodes() const { return nodes_; }

private:
    struct Entry {
        double value;
        int action;
    };

    double step_cost(Environment& env, int action) const {
        const Minutes before = env.state().clock;
        std::vector<bool> was_done(env.state().jobs.size());
        for (std::size_t j = 0; j < was_done.size(); ++j)
            was_done[j] = env.state().jobs[j].location == LocationKind::Done;
        env.step(action);
        if (objective_ == Objective::Makespan) return env.state().clock - before;
        double tardiness = 0.0;
        for (std::size_t j = 0; j < was_done.size(); ++j) {
            const auto& js = env.state().jobs[j];
            if (!was_done[j] && js.location == LocationKind::Done)
                tardiness += std::max(0.0, *js.completion_time - env.instance().jobs[j].deadline);
        }
        return tardiness;
    }

    Objective objective_;
    ExactOptions options_;
    std::optional<std::chrono::steady_clock::time_point> deadline_;
    std::unordered_map<std::vector<std::int64_t>, Entry, KeyHash> memo_;
    std::int64_t nodes_ = 0;
};

}  // namespace

ExactResult brute_force_optimal(const Environment& start, Objective objective, const ExactOptions& options) {
    Searcher search(objective, options);
    const double cost = search.solve(start);
    if (cost == kInf) throw DomainError("no deadlock-free schedule exists from this state");

    Environment env = start;
    ExactResult result;
    while (!env.state().done) {
        const int a = search.best_action(env);
        if (a < 0) throw std::logic_error("exact search lost its policy");
        result.actions.push_back(a);
        env.step(a);
    }
    result.schedule = env.schedule();
    result.kpis = env.kpis();
    result.value = objective == Objective::Makespan ? result.kpis.makespan : result.kpis.total_tardiness;
    result.nodes = search.nodes();
    return result;
}

ExactResult brute_force_optimal(std::shared_ptr<const Instance> instance, Objective objective,
                                const ExactOptions& options) {
    Environment env(std::move(instance), RewardConfig::makespan_only());
    return brute_force_optimal(env, objective, options);
}

}  // namespace jobshop
