#include <gtest/gtest.h>

#include <cmath>

#include "jobshop/neural.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace jobshop;
using namespace jobshop::testing;

TEST(Gradient, SurrogateMatchesCentralDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto net = toy_network(seed);
        EXPECT_EQ(net.params().size(), 13u);
        EXPECT_LT(max_relative_error(net, toy_batch(net)), 1e-4) << seed;
    }
}

TEST(Gradient, MaskedActionsGetNoGradient) {
    auto net = toy_network(3);
    auto batch = toy_batch(net);
    for (auto& s : batch) {
        s.mask = {true, false};
        s.action = 0;
        s.old_log_prob = 0.0;
    }
    EXPECT_LT(max_relative_error(net, batch), 1e-4);
}

TEST(MaskedSoftmax, MaskedEntriesAreMinusInfinity) {
    const auto lp = masked_log_softmax({1.0, 50.0, 2.0}, {true, false, true});
    EXPECT_TRUE(std::isinf(lp[1]) && lp[1] < 0);
    EXPECT_NEAR(std::exp(lp[0]) + std::exp(lp[2]), 1.0, 1e-12);
    EXPECT_THROW(masked_log_softmax({1.0}, {false}), DomainError);
}

TEST(NeuralPolicy, NeverSamplesMaskedActions) {
    const auto inst = example();
    auto enc = ObservationEncoder::for_instance(*inst);
    Environment env(inst);
    ActorCritic net(enc.input_size(), {8}, env.action_space().size());
    Rng init(1);
    net.initialize(init);
    // make NOOP (masked at t0) overwhelmingly attractive: policy-head bias follows
    // the 27x8 trunk and the 8x4 head weights
    net.params()[27 * 8 + 8 + 8 * 4 + 3] = 100.0;
    NeuralPolicy policy(enc, net);
    const auto probs = policy.probabilities(env);
    EXPECT_EQ(probs[3], 0.0);
    Rng rng(2);
    for (int i = 0; i < 100000; ++i) ASSERT_NE(policy.act(env, rng, ActMode::Sample), 3);
}

TEST(Encoder, SizeAndScaling) {
    const auto inst = example_instance();
    const auto enc = ObservationEncoder::for_instance(inst);
    // 3 job ids + 3 remaining times + 12 one-hot setups + 3 volumes + 3 slack + 3 loads
    EXPECT_EQ(enc.input_size(), 27);
    Environment env(example());
    const auto x = enc.encode(env.observe());
    ASSERT_EQ(x.size(), 27u);
    EXPECT_EQ(x[6], 1.0);  // M1 neutral
    EXPECT_EQ(x[18], 30.0 / 60.0);
    EXPECT_EQ(x[24], 1.0);
}

TEST(TrainPg, DeterministicParameterTrajectory) {
    PgHyperparams hp;
    hp.max_updates = 3;
    hp.batch_episodes = 4;
    hp.hidden_layer_sizes = {16};
    hp.seed = 5;
    const auto a = train_pg({example()}, hp, true);
    const auto b = train_pg({example()}, hp, true);
    ASSERT_EQ(a.parameter_history.size(), 3u);
    EXPECT_EQ(a.parameter_history, b.parameter_history);
    EXPECT_NE(a.parameter_history.front(), a.parameter_history.back());
    EXPECT_EQ(a.curve.size(), 12u);
}

TEST(TrainPg, HugeLearningRateDiverges) {
    PgHyperparams hp;
    hp.max_updates = 20;
    hp.batch_episodes = 2;
    hp.learning_rate = 1e300;
    EXPECT_THROW(train_pg({example()}, hp), DivergenceError);
}

TEST(TrainPg, RejectsMixedShapes) {
    PgHyperparams hp;
    hp.max_updates = 1;
    auto other = generate_instance(small_spec(1, 2, 2));
    EXPECT_THROW(train_pg({example(), shared(other)}, hp), DomainError);
}

TEST(TrainPg, HyperparameterValidation) {
    PgHyperparams hp;
    hp.clip = 1.0;
    EXPECT_THROW(hp.validate(), DomainError);
    hp = PgHyperparams{};
    hp.learning_rate = 0;
    EXPECT_THROW(hp.validate(), DomainError);
}

TEST(NeuralPolicy, ShapeMismatchIsReported) {
    const auto enc = ObservationEncoder::for_instance(example_instance());
    ActorCritic net(enc.input_size(), {4}, 4);
    NeuralPolicy p(enc, net);
    EXPECT_TRUE(p.incompatibility(example_instance(), Features{}).empty());
    EXPECT_NE(p.incompatibility(generate_instance(small_spec(2, 2, 2)), Features{}).find("incompatible"),
              std::string::npos);
}
