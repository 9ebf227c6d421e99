#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jobshop/environment.hpp"
#include "jobshop/random.hpp"

namespace jobshop {

enum class PolicyKind { Random, Fcfs, Edd, Spt, Lpt, TabularQ, Neural };

const char* to_string(PolicyKind kind);
// Accepts the lowercase names used on the command line ("fcfs", "edd", ...).
std::optional<PolicyKind> parse_policy_kind(const std::string& name);

enum class ActMode { Greedy, Sample };

class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyKind kind() const = 0;
    virtual std::string name() const { return to_string(kind()); }
    // Returns an action index eligible under env.mask(). Throws DomainError on
    // an empty mask.
    virtual int act(const Environment& env, Rng& rng, ActMode mode) const = 0;
    // Empty when the policy can drive `instance`; otherwise the reason it cannot.
    virtual std::string incompatibility(const Instance& instance, const Features& features) const {
        (void)instance;
        (void)features;
        return {};
    }
};

// Dispatching rules over the eligible assignments; NOOP when none is eligible.
// FCFS: longest wait in buffer. EDD: earliest deadline. SPT/LPT: smallest or
// largest total time of the next operation. RANDOM: uniform. Ties go to the
// lowest job index.
Action heuristic_select(PolicyKind kind, const Environment& env, Rng& rng);

class HeuristicPolicy final : public Policy {
public:
    explicit HeuristicPolicy(PolicyKind kind);
    PolicyKind kind() const override { return kind_; }
    int act(const Environment& env, Rng& rng, ActMode mode) const override;

private:
    PolicyKind kind_;
};

// Uniform over every eligible action, no-ops and pre-setups included. Used for
// fuzzing the environment.
class UniformMaskPolicy final : public Policy {
public:
    PolicyKind kind() const override { return PolicyKind::Random; }
    std::string name() const override { return "UNIFORM_MASK"; }
    int act(const Environment& env, Rng& rng, ActMode mode) const override;
};

// Lowest eligible index with the largest score; -inf scores never win.
int masked_argmax(const std::vector<double>& scores, const std::vector<bool>& mask);

struct RolloutResult {
    Schedule schedule;
    Trajectory trajectory;
    Kpis kpis;
    double total_reward = 0.0;
    bool deadlocked = false;
};

inline constexpr std::int64_t kDefaultMaxSteps = 100000;

// Runs `policy` from the environment's current state until the episode ends.
// Throws MaskedActionError when the policy picks an ineligible action and
// GuardExceeded when max_steps is hit.
RolloutResult rollout(Environment& env, const Policy& policy, std::uint64_t seed, ActMode mode = ActMode::Sample,
                      std::int64_t max_steps = kDefaultMaxSteps);

RolloutResult rollout(std::shared_ptr<const Instance> instance, const RewardConfig& config, const Features& features,
                      const Policy& policy, std::uint64_t seed, ActMode mode = ActMode::Sample);

// Replays a recorded action sequence from reset.
RolloutResult replay_actions(std::shared_ptr<const Instance> instance, const RewardConfig& config,
                             const Features& features, const std::vector<int>& actions);

}  // namespace jobshop
