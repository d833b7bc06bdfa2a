#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fairmix/fedsim.hpp"
#include "oracles.hpp"

using namespace fairmix;

namespace {

Dataset one_sample(std::vector<double> x, int y) { return Dataset{x.size(), 2, std::move(x), {y}}; }

// two-class softmax regression gradient for one sample, laid out as W (2 x d) then b
std::vector<double> logistic_grad(const std::vector<double>& theta, const std::vector<double>& x, int y) {
    const std::size_t d = x.size();
    double z[2];
    for (int c = 0; c < 2; ++c) {
        z[c] = theta[2 * d + c];
        for (std::size_t j = 0; j < d; ++j) z[c] += theta[c * d + j] * x[j];
    }
    const double p1 = 1.0 / (1.0 + std::exp(z[0] - z[1]));
    const double dz[2] = {(1.0 - p1) - (y == 0), p1 - (y == 1)};
    std::vector<double> g(theta.size());
    for (int c = 0; c < 2; ++c) {
        for (std::size_t j = 0; j < d; ++j) g[c * d + j] = dz[c] * x[j];
        g[2 * d + c] = dz[c];
    }
    return g;
}

SimulationSetup small_setup(MethodKind kind, std::size_t K, double C) {
    const auto data = make_synthetic(40 * K, 2, 2, 11);
    SimulationSetup s;
    s.clients = split_clients(partition(data, {PartitionScheme::Dirichlet, 0.5, 2, K, 11}), 0.25, 11);
    s.method.kind = kind;
    s.C = C;
    s.bounds = C < 1.0 ? ResponseBounds::cross_device(C) : ResponseBounds::cross_silo(K);
    s.seed = 4;
    return s;
}

}  // namespace

TEST(Sampling, ClientsPerRound) {
    EXPECT_EQ(clients_per_round(10, 0.3), 3u);
    EXPECT_EQ(clients_per_round(10, 0.01), 1u);
    EXPECT_EQ(clients_per_round(10, 1.0), 10u);
    EXPECT_EQ(clients_per_round(3, 0.7), 2u);
}

TEST(Sampling, SortedDistinctAndUniform) {
    Rng rng = make_rng(1, Stream::Sampling);
    EXPECT_EQ(sample_clients(5, 1.0, rng), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    std::vector<double> freq(10, 0.0);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const auto s = sample_clients(10, 0.3, rng);
        ASSERT_EQ(s.size(), 3u);
        ASSERT_TRUE(std::is_sorted(s.begin(), s.end()));
        ASSERT_TRUE(std::adjacent_find(s.begin(), s.end()) == s.end());
        for (auto k : s) freq[k] += 1.0 / draws;
    }
    // standard error is about 0.003
    for (double f : freq) EXPECT_NEAR(f, 0.3, 0.015);
    EXPECT_THROW(sample_clients(5, 0.0, rng), DomainError);
}

TEST(ClientUpdate, ZeroEpochsReportsLossOnly) {
    const ModelSpec spec;
    const auto data = make_synthetic(20, 2, 2, 0);
    GlobalModel model{std::vector<double>(spec.num_params(), 0.1)};
    Rng rng = make_rng(0, Stream::Client);
    const auto r = client_update(spec, model, data, {0, 5, 0.1, 0.0, 0.0}, rng, 3);
    EXPECT_EQ(r.delta, std::vector<double>(spec.num_params(), 0.0));
    EXPECT_DOUBLE_EQ(r.feedback_loss, mean_loss(spec, model.parameters, data));
    EXPECT_EQ(r.client_id, 3u);
    EXPECT_EQ(r.sample_count, 20u);
}

TEST(ClientUpdate, SingleSampleStepIsAnalytic) {
    const ModelSpec spec;
    const std::vector<double> x{1.0, 2.0};
    GlobalModel model{std::vector<double>(6, 0.0)};
    Rng rng = make_rng(0, Stream::Client);
    const auto r = client_update(spec, model, one_sample(x, 1), {1, 1, 0.5, 0.0, 0.0}, rng);
    const std::vector<double> expected{0.25, 0.5, -0.25, -0.5, 0.25, -0.25};
    EXPECT_LE(oracle::max_abs_diff(r.delta, expected), 1e-15);
    EXPECT_NEAR(r.feedback_loss, std::log(2.0), 1e-15);
}

TEST(ClientUpdate, ProximalTermActsFromSecondStep) {
    const ModelSpec spec;
    const std::vector<double> x{1.0, -0.5};
    const double lr = 0.3, mu = 2.0;
    GlobalModel model{{0.1, 0.0, -0.2, 0.3, 0.0, 0.05}};
    Rng a = make_rng(0, Stream::Client), b = make_rng(0, Stream::Client);
    const auto plain = client_update(spec, model, one_sample(x, 0), {1, 1, lr, 0.0, 0.0}, a);
    const auto prox = client_update(spec, model, one_sample(x, 0), {1, 1, lr, mu, 0.0}, b);
    EXPECT_EQ(plain.delta, prox.delta);

    Rng c = make_rng(0, Stream::Client);
    const auto two = client_update(spec, model, one_sample(x, 0), {2, 1, lr, mu, 0.0}, c);
    auto theta = model.parameters;
    for (int step = 0; step < 2; ++step) {
        const auto g = logistic_grad(theta, x, 0);
        for (std::size_t i = 0; i < theta.size(); ++i)
            theta[i] -= lr * (g[i] + mu * (theta[i] - model.parameters[i]));
    }
    for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(two.delta[i], model.parameters[i] - theta[i], 1e-14);
}

TEST(ServerOptimizer, FirstStepsInClosedForm) {
    const std::vector<double> g{1.0};
    GlobalModel sgd{{0.0}};
    ServerOptimizer({ServerOptimizerKind::SGD, 0.5}).apply(sgd, g);
    EXPECT_DOUBLE_EQ(sgd.parameters[0], -0.5);

    const double tau = 1e-3;
    auto two_steps = [&](ServerOptimizerKind kind) {
        ServerOptimizer opt({kind, 1.0, 0.9, 0.99, tau});
        GlobalModel m{{0.0}};
        opt.apply(m, g);
        const double first = m.parameters[0];
        opt.apply(m, g);
        return std::pair{first, opt.second_moment()[0]};
    };
    const auto [adam1, adam_v] = two_steps(ServerOptimizerKind::Adam);
    EXPECT_NEAR(adam1, -0.1 / (0.1 + tau), 1e-15);
    EXPECT_NEAR(adam_v, 0.99 * 0.01 + 0.01, 1e-15);
    const auto [yogi1, yogi_v] = two_steps(ServerOptimizerKind::Yogi);
    EXPECT_NEAR(yogi1, adam1, 1e-15);
    EXPECT_NEAR(yogi_v, 0.02, 1e-15);
    const auto [ada1, ada_v] = two_steps(ServerOptimizerKind::Adagrad);
    EXPECT_NEAR(ada1, -0.1 / (1.0 + tau), 1e-15);
    EXPECT_NEAR(ada_v, 2.0, 1e-15);

    EXPECT_THROW(ServerOptimizer({ServerOptimizerKind::Adam, 0.0}), DomainError);
    GlobalModel wrong{{0.0, 0.0}};
    ServerOptimizer opt;
    EXPECT_THROW(opt.apply(wrong, g), InvalidDimensionError);
}

TEST(Simulation, StaticIsSampleWeightedFedAvg) {
    auto setup = small_setup(MethodKind::Static, 5, 1.0);
    setup.lr_decay = 0.5;
    setup.decay_step = 1;
    Simulation sim(setup);
    Rng init = make_rng(setup.seed, Stream::Init);
    GlobalModel ref{init_params(setup.model, init)};
    for (std::size_t t = 0; t < 3; ++t) {
        LocalTraining local = setup.local;
        local.lr = setup.local.lr * std::pow(0.5, static_cast<double>(t));
        std::vector<double> mixed(ref.parameters.size(), 0.0);
        double n_total = 0.0;
        for (const auto& c : setup.clients) n_total += static_cast<double>(c.train.size());
        for (std::size_t k = 0; k < setup.clients.size(); ++k) {
            Rng rng = make_rng(setup.seed, Stream::Client, t, k);
            const auto r = client_update(setup.model, ref, setup.clients[k].train, local, rng);
            for (std::size_t i = 0; i < mixed.size(); ++i)
                mixed[i] += static_cast<double>(r.sample_count) / n_total * r.delta[i];
        }
        for (std::size_t i = 0; i < mixed.size(); ++i) ref.parameters[i] -= mixed[i];
        sim.run_round();
        EXPECT_LE(oracle::max_abs_diff(sim.model().parameters, ref.parameters), 1e-12) << "round " << t + 1;
    }
}

TEST(Simulation, SingleClientTakesWholeUpdate) {
    auto setup = small_setup(MethodKind::AAggFFD, 1, 1.0);
    Simulation sim(setup);
    const auto before = sim.model();
    const auto report = sim.run_round();
    EXPECT_EQ(report.mixing, std::vector<double>{1.0});
    EXPECT_EQ(report.decision, std::vector<double>{1.0});
    Rng rng = make_rng(setup.seed, Stream::Client, 0, 0);
    const auto r = client_update(setup.model, before, setup.clients[0].train, setup.local, rng);
    for (std::size_t i = 0; i < r.delta.size(); ++i)
        EXPECT_NEAR(sim.model().parameters[i], before.parameters[i] - r.delta[i], 1e-15);
}

TEST(Simulation, ReplayAndThreadCountGiveIdenticalRuns) {
    for (auto kind : {MethodKind::AAggFFD, MethodKind::QFedAvg}) {
        auto setup = small_setup(kind, 8, 0.5);
        if (kind == MethodKind::QFedAvg) setup.method.q = 1.0;
        Simulation a(setup), b(setup);
        setup.threads = 4;
        Simulation c(setup);
        const auto ra = a.run(6), rb = b.run(6), rc = c.run(6);
        for (std::size_t t = 0; t < 6; ++t) {
            EXPECT_EQ(ra[t].sampled, rb[t].sampled);
            EXPECT_EQ(ra[t].decision, rc[t].decision);
            EXPECT_EQ(ra[t].mixing, rc[t].mixing);
            EXPECT_EQ(ra[t].client_accuracy, rc[t].client_accuracy);
        }
        EXPECT_EQ(a.model(), b.model());
        EXPECT_EQ(a.model(), c.model());
    }
}

TEST(Simulation, DivergingClientIsDroppedWithWarning) {
    auto setup = small_setup(MethodKind::Static, 3, 1.0);
    setup.local.batch_size = 1;
    setup.clients[1].train = Dataset{2, 2, {1e200, 1e200, -1e200, 1e200}, {0, 1}};
    setup.clients[1].test = setup.clients[1].train;
    std::vector<std::string> warnings;
    ScopedWarningHandler capture([&](const std::string& m) { warnings.push_back(m); });
    setup.evaluate = false;
    Simulation sim(setup);
    const auto report = sim.run_round();
    EXPECT_EQ(report.dropped, std::vector<std::size_t>{1});
    EXPECT_EQ(report.sampled, (std::vector<std::size_t>{0, 2}));
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("dropping client 1"), std::string::npos) << warnings[0];
    EXPECT_TRUE(sim.model().finite());
}

TEST(SplitClients, KeepsAtLeastOneTrainingSample) {
    const auto data = make_synthetic(30, 2, 2, 0);
    const auto shards = partition(data, {PartitionScheme::IID, 1.0, 1, 3, 0});
    const auto clients = split_clients(shards, 0.2, 0);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(clients[k].test.size(), 2u);
        EXPECT_EQ(clients[k].train.size(), 8u);
    }
    const auto all_test = split_clients(shards, 1.0, 0);
    EXPECT_EQ(all_test[0].train.size(), 1u);
}
