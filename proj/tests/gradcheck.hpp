#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "jobshop/neural.hpp"

namespace jobshop::testing {

// 1 input -> 2 tanh units -> 2 actions + value.
inline ActorCritic toy_network(std::uint64_t seed) {
    ActorCritic net(1, {2}, 2);
    Rng rng(seed);
    for (double& p : net.params()) p = uniform_real(rng, -1.0, 1.0);
    return net;
}

inline std::vector<PpoSample> toy_batch(const ActorCritic& net) {
    std::vector<PpoSample> batch;
    const double inputs[] = {-0.7, 0.2, 1.3};
    const double advantages[] = {1.5, -0.8, 0.4};
    const double old_offsets[] = {0.05, -0.03, 0.5};  // last ratio sits on the clipped side
    for (int i = 0; i < 3; ++i) {
        PpoSample s;
        s.input = {inputs[i]};
        s.mask = {true, true};
        s.action = i % 2;
        const auto logp = masked_log_softmax(net.forward(s.input).logits, s.mask);
        s.old_log_prob = logp[s.action] + old_offsets[i];
        s.advantage = advantages[i];
        s.value_target = 0.3 * i - 0.2;
        batch.push_back(s);
    }
    return batch;
}

inline double max_relative_error(ActorCritic net, const std::vector<PpoSample>& batch) {
    std::vector<double> grad;
    ppo_loss(net, batch, 0.2, 0.5, 0.01, &grad);
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < net.params().size(); ++i) {
        const double keep = net.params()[i];
        net.params()[i] = keep + h;
        const double up = ppo_loss(net, batch, 0.2, 0.5, 0.01, nullptr).total;
        net.params()[i] = keep - h;
        const double down = ppo_loss(net, batch, 0.2, 0.5, 0.01, nullptr).total;
        net.params()[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
    }
    return worst;
}

}  // namespace jobshop::testing
