#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "jobshop/keys.hpp"
#include "jobshop/policies.hpp"

namespace jobshop {

struct QHyperparams {
    double alpha = 1.0;  // the environment is deterministic, so full-step backups are exact
    double gamma = 1.0;
    double epsilon_initial = 1.0;
    double epsilon_final = 0.05;
    double epsilon_decay_fraction = 0.8;  // share of episodes over which epsilon decays linearly
    int episodes = 5000;
    std::uint64_t seed = 0;
    std::size_t max_states = 2'000'000;
    RewardConfig reward = RewardConfig::makespan_only();
    Features features;

    void validate() const;
};

struct CurvePoint {
    int episode = 0;
    double episode_return = 0.0;
    double makespan = 0.0;
};

class TabularQPolicy final : public Policy {
public:
    using Table = std::unordered_map<std::vector<std::int64_t>, std::vector<double>, KeyHash>;

    TabularQPolicy(int action_count, bool include_clock, Table table = {});

    PolicyKind kind() const override { return PolicyKind::TabularQ; }
    // Greedy over Q in both modes; ties and unseen states resolve to the
    // lowest eligible index.
    int act(const Environment& env, Rng& rng, ActMode mode) const override;
    std::string incompatibility(const Instance& instance, const Features& features) const override;

    int action_count() const { return action_count_; }
    bool include_clock() const { return include_clock_; }
    const Table& table() const { return table_; }
    Table& table() { return table_; }

private:
    int action_count_;
    bool include_clock_;
    Table table_;
};

struct QTrainingResult {
    TabularQPolicy policy;
    std::vector<CurvePoint> curve;
};

// Epsilon-greedy Q-learning over canonical states and masked actions. Throws
// GuardExceeded when the table outgrows hp.max_states.
QTrainingResult train_q(std::shared_ptr<const Instance> instance, const QHyperparams& hp);

}  // namespace jobshop
