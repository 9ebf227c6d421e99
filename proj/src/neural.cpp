#include "jobshop/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace jobshop {

ObservationEncoder ObservationEncoder::for_instance(const Instance& instance) {
    ObservationEncoder enc;
    enc.machines = instance.machine_count();
    enc.jobs = instance.job_count();
    for (const auto& m : instance.machines) enc.setup_counts.push_back(m.setup_count());
    enc.horizon = horizon_estimate(instance);
    enc.volume_scale = 1.0;
    for (const auto& b : instance.buffers) enc.volume_scale = std::max(enc.volume_scale, b.capacity);
    return enc;
}

int ObservationEncoder::input_size() const {
    return 2 * machines + std::accumulate(setup_counts.begin(), setup_counts.end(), 0) + 2 * jobs + machines;
}

std::vector<double> ObservationEncoder::encode(const Observation& obs) const {
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(input_size()));
    const double job_scale = jobs > 0 ? static_cast<double>(jobs) : 1.0;
    for (int k = 0; k < machines; ++k) x.push_back(obs.machine_info[0][k] / job_scale);
    for (int k = 0; k < machines; ++k) x.push_back(obs.machine_info[1][k] / horizon);
    for (int k = 0; k < machines; ++k) {
        const int setup = static_cast<int>(obs.machine_info[2][k]);
        for (int s = 0; s < setup_counts[k]; ++s) x.push_back(s == setup ? 1.0 : 0.0);
    }
    for (int j = 0; j < jobs; ++j) x.push_back(obs.job_info[0][j] / volume_scale);
    for (int j = 0; j < jobs; ++j) x.push_back(obs.job_info[1][j] / horizon);
    for (int k = 0; k < machines; ++k) x.push_back(obs.buffer_info[k] / volume_scale);
    return x;
}

ActorCritic::ActorCritic(int inputs, std::vector<int> hidden, int actions)
    : inputs_(inputs), actions_(actions), hidden_(std::move(hidden)) {
    if (inputs < 1 || actions < 1) throw DomainError("network needs at least one input and one action");
    for (int h : hidden_)
        if (h < 1) throw DomainError("hidden layer sizes must be positive");
    layout();
}

void ActorCritic::layout() {
    std::size_t offset = 0;
    auto dense = [&](int in, int out) {
        Dense d{offset, offset + static_cast<std::size_t>(in) * out, in, out};
        offset = d.bias + static_cast<std::size_t>(out);
        return d;
    };
    trunk_.clear();
    int width = inputs_;
    for (int h : hidden_) {
        trunk_.push_back(dense(width, h));
        width = h;
    }
    policy_head_ = dense(width, actions_);
    value_head_ = dense(width, 1);
    params_.assign(offset, 0.0);
}

void ActorCritic::initialize(Rng& rng) {
    auto fill = [&](const Dense& d, double gain) {
        const double scale = gain / std::sqrt(static_cast<double>(d.in));
        for (std::size_t i = 0; i < static_cast<std::size_t>(d.in) * d.out; ++i)
            params_[d.weights + i] = scale * standard_normal(rng);
        for (int i = 0; i < d.out; ++i) params_[d.bias + i] = 0.0;
    };
    for (const auto& d : trunk_) fill(d, 1.0);
    fill(policy_head_, 0.01);
    fill(value_head_, 1.0);
}

namespace {

void affine(const std::vector<double>& p, std::size_t w, std::size_t b, int in, int out, const double* x, double* y) {
    for (int o = 0; o < out; ++o) {
        double sum = p[b + o];
        const double* row = &p[w + static_cast<std::size_t>(o) * in];
        for (int i = 0; i < in; ++i) sum += row[i] * x[i];
        y[o] = sum;
    }
}

}  // namespace

ActorCritic::Cache ActorCritic::forward(const std::vector<double>& input) const {
    if (static_cast<int>(input.size()) != inputs_) throw DomainError("network input has the wrong size");
    Cache cache;
    cache.activations.reserve(trunk_.size() + 1);
    cache.activations.push_back(input);
    for (const auto& d : trunk_) {
        std::vector<double> out(static_cast<std::size_t>(d.out));
        affine(params_, d.weights, d.bias, d.in, d.out, cache.activations.back().data(), out.data());
        for (double& v : out) v = std::tanh(v);
        cache.activations.push_back(std::move(out));
    }
    const auto& last = cache.activations.back();
    cache.logits.resize(static_cast<std::size_t>(actions_));
    affine(params_, policy_head_.weights, policy_head_.bias, policy_head_.in, actions_, last.data(), cache.logits.data());
    affine(params_, value_head_.weights, value_head_.bias, value_head_.in, 1, last.data(), &cache.value);
    return cache;
}

void ActorCritic::backward(const Cache& cache, const std::vector<double>& dlogits, double dvalue,
                           std::vector<double>& grad) const {
    if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
    const auto& last = cache.activations.back();
    const int width = static_cast<int>(last.size());
    std::vector<double> dlast(static_cast<std::size_t>(width), 0.0);

    for (int o = 0; o < actions_; ++o) {
        const double g = dlogits[o];
        if (g == 0.0) continue;
        grad[policy_head_.bias + o] += g;
        const std::size_t row = policy_head_.weights + static_cast<std::size_t>(o) * width;
        for (int i = 0; i < width; ++i) {
            grad[row + i] += g * last[i];
            dlast[i] += params_[row + i] * g;
        }
    }
    if (dvalue != 0.0) {
        grad[value_head_.bias] += dvalue;
        for (int i = 0; i < width; ++i) {
            grad[value_head_.weights + i] += dvalue * last[i];
            dlast[i] += params_[value_head_.weights + i] * dvalue;
        }
    }

    std::vector<double> upstream = std::move(dlast);
    for (std::size_t l = trunk_.size(); l-- > 0;) {
        const auto& d = trunk_[l];
        const auto& out = cache.activations[l + 1];
        const auto& in = cache.activations[l];
        std::vector<double> dz(static_cast<std::size_t>(d.out));
        for (int o = 0; o < d.out; ++o) dz[o] = upstream[o] * (1.0 - out[o] * out[o]);
        std::vector<double> din(static_cast<std::size_t>(d.in), 0.0);
        for (int o = 0; o < d.out; ++o) {
            if (dz[o] == 0.0) continue;
            grad[d.bias + o] += dz[o];
            const std::size_t row = d.weights + static_cast<std::size_t>(o) * d.in;
            for (int i = 0; i < d.in; ++i) {
                grad[row + i] += dz[o] * in[i];
                din[i] += params_[row + i] * dz[o];
            }
        }
        upstream = std::move(din);
    }
}

std::vector<double> masked_log_softmax(const std::vector<double>& logits, const std::vector<bool>& mask) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    double top = neg_inf;
    for (std::size_t a = 0; a < logits.size(); ++a)
        if (mask[a]) top = std::max(top, logits[a]);
    if (top == neg_inf) throw DomainError("empty action mask");
    double sum = 0.0;
    for (std::size_t a = 0; a < logits.size(); ++a)
        if (mask[a]) sum += std::exp(logits[a] - top);
    const double lse = top + std::log(sum);
    std::vector<double> out(logits.size(), neg_inf);
    for (std::size_t a = 0; a < logits.size(); ++a)
        if (mask[a]) out[a] = logits[a] - lse;
    return out;
}

PpoLoss ppo_loss(const ActorCritic& net, const std::vector<PpoSample>& batch, double clip, double value_coef,
                 double entropy_coef, std::vector<double>* grad) {
    PpoLoss loss;
    if (grad) grad->assign(net.params().size(), 0.0);
    if (batch.empty()) return loss;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dlogits(static_cast<std::size_t>(net.actions()));

    for (const auto& s : batch) {
        const auto cache = net.forward(s.input);
        const auto logp = masked_log_softmax(cache.logits, s.mask);
        double entropy = 0.0;
        for (std::size_t a = 0; a < logp.size(); ++a)
            if (s.mask[a]) entropy -= std::exp(logp[a]) * logp[a];

        const double ratio = std::exp(logp[s.action] - s.old_log_prob);
        const double unclipped = ratio * s.advantage;
        const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * s.advantage;
        const double surrogate = std::min(unclipped, clipped);
        const double diff = cache.value - s.value_target;

        loss.surrogate += surrogate * inv_n;
        loss.value += diff * diff * inv_n;
        loss.entropy += entropy * inv_n;

        if (!grad) continue;
        // d(-surrogate)/d logp[action]; zero on the clipped branch.
        const double dlogp = unclipped <= clipped ? -ratio * s.advantage * inv_n : 0.0;
        for (std::size_t a = 0; a < dlogits.size(); ++a) {
            if (!s.mask[a]) {
                dlogits[a] = 0.0;
                continue;
            }
            const double p = std::exp(logp[a]);
            const double indicator = static_cast<int>(a) == s.action ? 1.0 : 0.0;
            dlogits[a] = dlogp * (indicator - p) + entropy_coef * inv_n * p * (logp[a] + entropy);
        }
        net.backward(cache, dlogits, 2.0 * value_coef * diff * inv_n, *grad);
    }
    loss.total = -loss.surrogate + value_coef * loss.value - entropy_coef * loss.entropy;
    return loss;
}

void PgHyperparams::validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw DomainError("clip must lie in (0, 1)");
    if (gamma < 0.0 || gamma > 1.0) throw DomainError("gamma must lie in [0, 1]");
    if (gae_lambda < 0.0 || gae_lambda > 1.0) throw DomainError("gae_lambda must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (epochs_per_batch < 1 || batch_episodes < 1 || minibatches < 1 || max_updates < 1)
        throw DomainError("epochs, batch episodes, minibatches and updates must be positive");
    if (entropy_coef < 0.0 || value_coef < 0.0 || max_grad_norm <= 0.0)
        throw DomainError("loss coefficients must be non-negative");
    reward.validate();
}

NeuralPolicy::NeuralPolicy(ObservationEncoder encoder, ActorCritic net) : encoder_(std::move(encoder)), net_(std::move(net)) {
    if (encoder_.input_size() != net_.inputs()) throw DomainError("encoder and network input sizes differ");
}

std::vector<double> NeuralPolicy::probabilities(const Environment& env) const {
    const auto logp = masked_log_softmax(net_.forward(encoder_.encode(env.observe())).logits, env.mask());
    std::vector<double> p(logp.size());
    for (std::size_t a = 0; a < p.size(); ++a) p[a] = env.mask()[a] ? std::exp(logp[a]) : 0.0;
    return p;
}

int NeuralPolicy::act(const Environment& env, Rng& rng, ActMode mode) const {
    const auto& mask = env.mask();
    if (static_cast<int>(mask.size()) != net_.actions()) throw DomainError("policy/instance incompatible: action count");
    const auto logits = net_.forward(encoder_.encode(env.observe())).logits;
    if (mode == ActMode::Greedy) return masked_argmax(logits, mask);
    const auto logp = masked_log_softmax(logits, mask);
    const double u = uniform01(rng);
    double acc = 0.0;
    int last = -1;
    for (std::size_t a = 0; a < logp.size(); ++a) {
        if (!mask[a]) continue;
        last = static_cast<int>(a);
        acc += std::exp(logp[a]);
        if (u < acc) return last;
    }
    return last;
}

std::string NeuralPolicy::incompatibility(const Instance& instance, const Features& features) const {
    const auto enc = ObservationEncoder::for_instance(instance);
    if (enc.machines != encoder_.machines || enc.jobs != encoder_.jobs || enc.setup_counts != encoder_.setup_counts)
        return "policy/instance incompatible: trained for " + std::to_string(encoder_.jobs) + " jobs x " +
               std::to_string(encoder_.machines) + " machines, instance has " + std::to_string(enc.jobs) + " x " +
               std::to_string(enc.machines);
    if (ActionSpace(instance, features).size() != net_.actions())
        return "policy/instance incompatible: action count differs";
    return {};
}

PgTrainingResult train_pg(const std::vector<std::shared_ptr<const Instance>>& instances, const PgHyperparams& hp,
                          bool keep_history) {
    hp.validate();
    if (instances.empty()) throw DomainError("need at least one training instance");

    std::vector<Environment> envs;
    for (const auto& inst : instances) envs.emplace_back(inst, hp.reward, hp.features);
    auto encoder = ObservationEncoder::for_instance(*instances.front());
    for (const auto& inst : instances) {
        const auto other = ObservationEncoder::for_instance(*inst);
        if (other.machines != encoder.machines || other.jobs != encoder.jobs || other.setup_counts != encoder.setup_counts)
            throw DomainError("training instances must share one shape");
        encoder.horizon = std::max(encoder.horizon, other.horizon);
    }
    const int actions = envs.front().action_space().size();
    const double reward_scale = 1.0 / encoder.horizon;

    Rng rng(hp.seed);
    ActorCritic net(encoder.input_size(), hp.hidden_layer_sizes, actions);
    net.initialize(rng);

    const std::size_t n_params = net.params().size();
    std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0), grad;
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::int64_t adam_t = 0;

    PgTrainingResult out{NeuralPolicy(encoder, net), {}, {}};
    int episode_index = 0;

    for (int update = 0; update < hp.max_updates; ++update) {
        std::vector<PpoSample> batch;
        for (int e = 0; e < hp.batch_episodes; ++e, ++episode_index) {
            auto& env = envs[static_cast<std::size_t>(episode_index) % envs.size()];
            env.reset();
            std::vector<double> values, rewards;
            const std::size_t first = batch.size();
            double episode_return = 0.0;
            while (!env.state().done) {
                if (values.size() > static_cast<std::size_t>(kDefaultMaxSteps))
                    throw GuardExceeded("training episode exceeded step limit");
                PpoSample s;
                s.input = encoder.encode(env.observe());
                s.mask = env.mask();
                const auto cache = net.forward(s.input);
                const auto logp = masked_log_softmax(cache.logits, s.mask);
                const double u = uniform01(rng);
                double acc = 0.0;
                int chosen = -1;
                for (std::size_t a = 0; a < logp.size(); ++a) {
                    if (!s.mask[a]) continue;
                    chosen = static_cast<int>(a);
                    acc += std::exp(logp[a]);
                    if (u < acc) break;
                }
                s.action = chosen;
                s.old_log_prob = logp[chosen];
                const auto result = env.step(chosen);
                episode_return += result.reward;
                values.push_back(cache.value);
                rewards.push_back(result.reward * reward_scale);
                batch.push_back(std::move(s));
            }
            // Generalised advantage estimation, terminal value 0.
            double gae = 0.0;
            for (std::size_t t = values.size(); t-- > 0;) {
                const double next_value = t + 1 < values.size() ? values[t + 1] : 0.0;
                const double delta = rewards[t] + hp.gamma * next_value - values[t];
                gae = delta + hp.gamma * hp.gae_lambda * gae;
                batch[first + t].advantage = gae;
                batch[first + t].value_target = gae + values[t];
            }
            out.curve.push_back({episode_index, episode_return, env.kpis().makespan});
        }

        double mean = 0.0;
        for (const auto& s : batch) mean += s.advantage;
        mean /= static_cast<double>(batch.size());
        double var = 0.0;
        for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
        const double stdev = std::sqrt(var / static_cast<double>(batch.size()));
        for (auto& s : batch) s.advantage = (s.advantage - mean) / (stdev + 1e-8);

        std::vector<std::size_t> order(batch.size());
        std::iota(order.begin(), order.end(), 0);
        const std::size_t chunk = (batch.size() + hp.minibatches - 1) / static_cast<std::size_t>(hp.minibatches);
        for (int epoch = 0; epoch < hp.epochs_per_batch; ++epoch) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
            for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
                std::vector<PpoSample> mini;
                for (std::size_t i = begin; i < std::min(order.size(), begin + chunk); ++i) mini.push_back(batch[order[i]]);
                const auto loss = ppo_loss(net, mini, hp.clip, hp.value_coef, hp.entropy_coef, &grad);
                double norm = 0.0;
                for (double g : grad) norm += g * g;
                norm = std::sqrt(norm);
                if (!std::isfinite(loss.total) || !std::isfinite(norm))
                    throw DivergenceError("non-finite loss at update " + std::to_string(update));
                const double scale = norm > hp.max_grad_norm ? hp.max_grad_norm / norm : 1.0;
                ++adam_t;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
                auto& p = net.params();
                for (std::size_t i = 0; i < n_params; ++i) {
                    const double g = grad[i] * scale;
                    adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * g;
                    adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * g * g;
                    p[i] -= hp.learning_rate * (adam_m[i] / c1) / (std::sqrt(adam_v[i] / c2) + adam_eps);
                }
            }
        }
        if (keep_history) out.parameter_history.push_back(net.params());
    }
    out.policy = NeuralPolicy(encoder, net);
    return out;
}

}  // namespace jobshop
