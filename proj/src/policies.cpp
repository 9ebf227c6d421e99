#include "jobshop/policies.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace jobshop {

const char* to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Random: return "RANDOM";
        case PolicyKind::Fcfs: return "FCFS";
        case PolicyKind::Edd: return "EDD";
        case PolicyKind::Spt: return "SPT";
        case PolicyKind::Lpt: return "LPT";
        case PolicyKind::TabularQ: return "TABULAR_Q";
        case PolicyKind::Neural: return "NEURAL";
    }
    return "?";
}

std::optional<PolicyKind> parse_policy_kind(const std::string& name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "random") return PolicyKind::Random;
    if (lower == "fcfs") return PolicyKind::Fcfs;
    if (lower == "edd") return PolicyKind::Edd;
    if (lower == "spt") return PolicyKind::Spt;
    if (lower == "lpt") return PolicyKind::Lpt;
    if (lower == "tabular_q" || lower == "q") return PolicyKind::TabularQ;
    if (lower == "neural" || lower == "pg") return PolicyKind::Neural;
    return std::nullopt;
}

int masked_argmax(const std::vector<double>& scores, const std::vector<bool>& mask) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mask.size(); ++a) {
        if (!mask[a]) continue;
        if (best < 0 || scores[a] > best_score) {
            best = static_cast<int>(a);
            best_score = scores[a];
        }
    }
    if (best < 0) throw DomainError("no eligible action");
    return best;
}

Action heuristic_select(PolicyKind kind, const Environment& env, Rng& rng) {
    const auto& mask = env.mask();
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) throw DomainError("empty action mask");

    std::vector<JobId> candidates;
    for (JobId j = 0; j < env.instance().job_count(); ++j)
        if (mask[j]) candidates.push_back(j);
    if (candidates.empty()) return Action::noop();

    const auto& state = env.state();
    const auto& inst = env.instance();
    auto pick_min = [&](auto&& score) {
        JobId best = candidates.front();
        double best_score = score(best);
        for (JobId j : candidates) {
            const double s = score(j);
            if (s < best_score - kTimeEps) {
                best = j;
                best_score = s;
            }
        }
        return Action::assign(best);
    };

    switch (kind) {
        case PolicyKind::Random: return Action::assign(candidates[uniform_index(rng, candidates.size())]);
        case PolicyKind::Fcfs: return pick_min([&](JobId j) { return state.jobs[j].waiting_since; });
        case PolicyKind::Edd: return pick_min([&](JobId j) { return inst.jobs[j].deadline; });
        case PolicyKind::Spt: return pick_min([&](JobId j) { return env.dispatch_time(j); });
        case PolicyKind::Lpt: return pick_min([&](JobId j) { return -env.dispatch_time(j); });
        default: throw DomainError(std::string("not a dispatching rule: ") + to_string(kind));
    }
}

HeuristicPolicy::HeuristicPolicy(PolicyKind kind) : kind_(kind) {
    switch (kind) {
        case PolicyKind::Random:
        case PolicyKind::Fcfs:
        case PolicyKind::Edd:
        case PolicyKind::Spt:
        case PolicyKind::Lpt: break;
        default: throw DomainError(std::string("not a dispatching rule: ") + to_string(kind));
    }
}

int HeuristicPolicy::act(const Environment& env, Rng& rng, ActMode) const {
    return env.action_space().encode(heuristic_select(kind_, env, rng));
}

int UniformMaskPolicy::act(const Environment& env, Rng& rng, ActMode) const {
    std::vector<int> eligible;
    const auto& mask = env.mask();
    for (std::size_t a = 0; a < mask.size(); ++a)
        if (mask[a]) eligible.push_back(static_cast<int>(a));
    if (eligible.empty()) throw DomainError("empty action mask");
    return eligible[uniform_index(rng, eligible.size())];
}

RolloutResult rollout(Environment& env, const Policy& policy, std::uint64_t seed, ActMode mode, std::int64_t max_steps) {
    Rng rng(seed);
    RolloutResult out;
    out.trajectory.initial = env.observe();
    std::int64_t index = 0;
    while (!env.state().done) {
        if (index >= max_steps) throw GuardExceeded("rollout exceeded " + std::to_string(max_steps) + " steps");
        const int action = policy.act(env, rng, mode);
        if (action < 0 || action >= env.action_space().size() || !env.mask()[action])
            throw MaskedActionError(policy.name() + " chose masked action " + std::to_string(action) + " at t=" +
                                    std::to_string(env.state().clock));
        auto result = env.step(action);
        out.total_reward += result.reward;
        out.trajectory.steps.push_back({index++, env.state().clock, action, result.reward, std::move(result.observation)});
    }
    out.schedule = env.schedule();
    out.kpis = env.kpis();
    out.deadlocked = env.state().deadlocked;
    return out;
}

RolloutResult rollout(std::shared_ptr<const Instance> instance, const RewardConfig& config, const Features& features,
                      const Policy& policy, std::uint64_t seed, ActMode mode) {
    Environment env(std::move(instance), config, features);
    return rollout(env, policy, seed, mode);
}

RolloutResult replay_actions(std::shared_ptr<const Instance> instance, const RewardConfig& config,
                             const Features& features, const std::vector<int>& actions) {
    Environment env(std::move(instance), config, features);
    RolloutResult out;
    out.trajectory.initial = env.observe();
    std::int64_t index = 0;
    for (int action : actions) {
        auto result = env.step(action);
        out.total_reward += result.reward;
        out.trajectory.steps.push_back({index++, env.state().clock, action, result.reward, std::move(result.observation)});
    }
    out.schedule = env.schedule();
    out.kpis = env.kpis();
    out.deadlocked = env.state().deadlocked;
    return out;
}

}  // namespace jobshop
