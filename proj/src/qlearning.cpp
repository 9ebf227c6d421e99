#include "jobshop/qlearning.hpp"

#include <algorithm>
#include <limits>

namespace jobshop {

void QHyperparams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
    if (gamma < 0.0 || gamma > 1.0) throw DomainError("gamma must lie in [0, 1]");
    if (epsilon_initial < 0.0 || epsilon_initial > 1.0 || epsilon_final < 0.0 || epsilon_final > 1.0)
        throw DomainError("epsilon must lie in [0, 1]");
    if (epsilon_decay_fraction <= 0.0) throw DomainError("epsilon decay fraction must be positive");
    if (episodes < 1) throw DomainError("need at least one episode");
    reward.validate();
}

TabularQPolicy::TabularQPolicy(int action_count, bool include_clock, Table table)
    : action_count_(action_count), include_clock_(include_clock), table_(std::move(table)) {}

int TabularQPolicy::act(const Environment& env, Rng&, ActMode) const {
    const auto& mask = env.mask();
    if (static_cast<int>(mask.size()) != action_count_) throw DomainError("policy/instance incompatible: action count");
    auto it = table_.find(env.canonical_key(include_clock_));
    if (it == table_.end()) return masked_argmax(std::vector<double>(mask.size(), 0.0), mask);
    return masked_argmax(it->second, mask);
}

std::string TabularQPolicy::incompatibility(const Instance& instance, const Features& features) const {
    const ActionSpace space(instance, features);
    if (space.size() != action_count_)
        return "policy/instance incompatible: policy has " + std::to_string(action_count_) +
               " actions, instance needs " + std::to_string(space.size());
    return {};
}

QTrainingResult train_q(std::shared_ptr<const Instance> instance, const QHyperparams& hp) {
    hp.validate();
    Environment env(std::move(instance), hp.reward, hp.features);
    const int actions = env.action_space().size();
    const bool include_clock = hp.reward.w_tardy != 0.0;
    TabularQPolicy::Table table;
    Rng rng(hp.seed);
    std::vector<CurvePoint> curve;
    curve.reserve(static_cast<std::size_t>(hp.episodes));

    auto row_for = [&](const std::vector<std::int64_t>& key) -> std::vector<double>& {
        auto [it, inserted] = table.try_emplace(key);
        if (inserted) {
            if (table.size() > hp.max_states)
                throw GuardExceeded("Q table exceeded " + std::to_string(hp.max_states) + " states");
            it->second.assign(static_cast<std::size_t>(actions), 0.0);
        }
        return it->second;
    };

    const double decay_episodes = std::max(1.0, hp.epsilon_decay_fraction * hp.episodes);
    for (int episode = 0; episode < hp.episodes; ++episode) {
        const double progress = std::min(1.0, episode / decay_episodes);
        const double epsilon = hp.epsilon_initial + (hp.epsilon_final - hp.epsilon_initial) * progress;
        env.reset();
        double episode_return = 0.0;
        std::int64_t steps = 0;
        while (!env.state().done) {
            if (++steps > kDefaultMaxSteps) throw GuardExceeded("Q-learning episode exceeded step limit");
            const auto key = env.canonical_key(include_clock);
            const auto mask = env.mask();
            int action;
            if (uniform01(rng) < epsilon) {
                std::vector<int> eligible;
                for (int a = 0; a < actions; ++a)
                    if (mask[a]) eligible.push_back(a);
                action = eligible[uniform_index(rng, eligible.size())];
            } else {
                action = masked_argmax(row_for(key), mask);
            }
            const auto result = env.step(action);
            episode_return += result.reward;
            double target = result.reward;
            if (!result.done) {
                const auto& next = row_for(env.canonical_key(include_clock));
                target += hp.gamma * next[masked_argmax(next, env.mask())];
            }
            auto& q = row_for(key);
            q[action] += hp.alpha * (target - q[action]);
        }
        curve.push_back({episode, episode_return, env.kpis().makespan});
    }
    return {TabularQPolicy(actions, include_clock, std::move(table)), std::move(curve)};
}

}  // namespace jobshop
