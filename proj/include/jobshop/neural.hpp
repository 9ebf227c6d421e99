#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "jobshop/policies.hpp"
#include "jobshop/qlearning.hpp"

namespace jobshop {

// Flattens an Observation into network inputs: times scaled by a horizon
// estimate, volumes by the largest buffer capacity, setup ids one-hot.
struct ObservationEncoder {
    int machines = 0;
    int jobs = 0;
    std::vector<int> setup_counts;
    double horizon = 1.0;
    double volume_scale = 1.0;

    static ObservationEncoder for_instance(const Instance& instance);
    int input_size() const;
    std::vector<double> encode(const Observation& obs) const;
    bool operator==(const ObservationEncoder&) const = default;
};

// Shared tanh trunk with a policy-logit head and a scalar value head. All
// weights live in one flat vector so optimisers and finite differences can
// treat the network as a plain parameter vector.
class ActorCritic {
public:
    ActorCritic() = default;
    ActorCritic(int inputs, std::vector<int> hidden, int actions);

    void initialize(Rng& rng);

    struct Cache {
        std::vector<std::vector<double>> activations;  // input, then each hidden layer output
        std::vector<double> logits;
        double value = 0.0;
    };
    Cache forward(const std::vector<double>& input) const;
    // Accumulates dLoss/dparams into `grad` given dLoss/dlogits and dLoss/dvalue.
    void backward(const Cache& cache, const std::vector<double>& dlogits, double dvalue, std::vector<double>& grad) const;

    int inputs() const { return inputs_; }
    int actions() const { return actions_; }
    const std::vector<int>& hidden() const { return hidden_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

private:
    struct Dense {
        std::size_t weights;  // offset, row-major [out][in]
        std::size_t bias;
        int in;
        int out;
    };
    void layout();

    int inputs_ = 0;
    int actions_ = 0;
    std::vector<int> hidden_;
    std::vector<Dense> trunk_;
    Dense policy_head_{};
    Dense value_head_{};
    std::vector<double> params_;
};

// Log-probabilities over eligible actions; masked entries are -inf.
std::vector<double> masked_log_softmax(const std::vector<double>& logits, const std::vector<bool>& mask);

struct PpoSample {
    std::vector<double> input;
    std::vector<bool> mask;
    int action = 0;
    double old_log_prob = 0.0;
    double advantage = 0.0;
    double value_target = 0.0;
};

struct PpoLoss {
    double total = 0.0;
    double surrogate = 0.0;  // mean clipped surrogate (to be maximised)
    double value = 0.0;
    double entropy = 0.0;
};

// Loss = -mean(min(r*A, clip(r, 1-eps, 1+eps)*A)) + c_v*mean((V-R)^2) - c_e*mean(H).
// Writes the analytic gradient into `grad` (resized and zeroed) when non-null.
PpoLoss ppo_loss(const ActorCritic& net, const std::vector<PpoSample>& batch, double clip, double value_coef,
                 double entropy_coef, std::vector<double>* grad);

struct PgHyperparams {
    double clip = 0.2;
    double gamma = 1.0;
    double gae_lambda = 0.95;
    double learning_rate = 1e-3;
    int epochs_per_batch = 4;
    int batch_episodes = 16;
    int minibatches = 4;
    std::vector<int> hidden_layer_sizes{64, 64};
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    int max_updates = 150;
    std::uint64_t seed = 0;
    RewardConfig reward = RewardConfig::makespan_only();
    Features features;

    void validate() const;
};

class NeuralPolicy final : public Policy {
public:
    NeuralPolicy(ObservationEncoder encoder, ActorCritic net);

    PolicyKind kind() const override { return PolicyKind::Neural; }
    int act(const Environment& env, Rng& rng, ActMode mode) const override;
    std::string incompatibility(const Instance& instance, const Features& features) const override;

    std::vector<double> probabilities(const Environment& env) const;

    const ObservationEncoder& encoder() const { return encoder_; }
    const ActorCritic& net() const { return net_; }

private:
    ObservationEncoder encoder_;
    ActorCritic net_;
};

struct PgTrainingResult {
    NeuralPolicy policy;
    std::vector<CurvePoint> curve;
    std::vector<std::vector<double>> parameter_history;  // parameters after every update
};

// Clipped-surrogate actor-critic training with generalised advantage
// estimation. Episodes cycle through `instances`, which must share one shape.
// Deterministic for a given seed. Throws DivergenceError on a non-finite loss.
PgTrainingResult train_pg(const std::vector<std::shared_ptr<const Instance>>& instances, const PgHyperparams& hp,
                          bool keep_history = false);

}  // namespace jobshop
