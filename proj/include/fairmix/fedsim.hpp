#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "fairmix/aggregator.hpp"
#include "fairmix/error.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/modeldata.hpp"
#include "fairmix/response.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {

struct GlobalModel {
    std::vector<double> parameters;

    bool finite() const {
        return std::all_of(parameters.begin(), parameters.end(), [](double v) { return std::isfinite(v); });
    }
    friend bool operator==(const GlobalModel&, const GlobalModel&) = default;
};

struct ClientUpdateResult {
    std::size_t client_id = 0;
    double feedback_loss = 0.0;  ///< loss of the received model, before any local step
    std::vector<double> delta;   ///< received - trained
    std::size_t sample_count = 0;
};

/// Local training hyperparameters shared by every client.
struct LocalTraining {
    std::size_t epochs = 1;
    std::size_t batch_size = 20;
    double lr = 0.1;
    double prox_mu = 0.0;       ///< FedProx proximal strength
    double weight_decay = 0.0;  ///< L2 penalty
};

// ---------------------------------------------------------------------------
// Sampling

/// Number of clients drawn per round: max(1, floor(C K)).
inline std::size_t clients_per_round(std::size_t K, double C) {
    const auto m = static_cast<std::size_t>(std::floor(C * static_cast<double>(K) + 1e-9));
    return std::clamp<std::size_t>(m, 1, K);
}

/// Uniform sample without replacement, returned in ascending order.
inline std::vector<std::size_t> sample_clients(std::size_t K, double C, Rng& rng) {
    if (K == 0) throw InvalidDimensionError("sample_clients: K must be positive");
    if (!(C > 0.0) || C > 1.0) throw DomainError("sample_clients: C must lie in (0, 1]");
    const std::size_t m = clients_per_round(K, C);
    std::vector<std::size_t> ids(K);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    if (m < K) {
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, K - 1);
            std::swap(ids[i], ids[pick(rng)]);
        }
        ids.resize(m);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// Client update

/// Reports the loss of the received model, then runs `epochs` of shuffled minibatch SGD.
inline ClientUpdateResult client_update(const ModelSpec& spec, const GlobalModel& model, const Dataset& data,
                                        const LocalTraining& cfg, Rng& rng, std::size_t client_id = 0,
                                        std::size_t round = 0) {
    if (data.size() == 0) throw DegenerateInputError("client_update: empty dataset");
    if (cfg.batch_size == 0) throw DomainError("client_update: batch size must be positive");

    ClientUpdateResult result;
    result.client_id = client_id;
    result.sample_count = data.size();
    result.feedback_loss = mean_loss(spec, model.parameters, data);
    if (!std::isfinite(result.feedback_loss))
        throw DivergenceError("client_update: non-finite feedback loss", client_id, round);

    std::vector<double> local = model.parameters;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> batch(order.data() + start, stop - start);
            auto lg = [&] {
                try {
                    return loss_and_grad(spec, local, data, batch);
                } catch (const NumericalFailureError&) {
                    throw DivergenceError("client_update: parameters diverged", client_id, round);
                }
            }();
            if (!std::isfinite(lg.loss))
                throw DivergenceError("client " + std::to_string(client_id) + " diverged in round " +
                                          std::to_string(round),
                                      client_id, round);
            for (std::size_t i = 0; i < local.size(); ++i) {
                double g = lg.grad[i] + cfg.weight_decay * local[i];
                g += cfg.prox_mu * (local[i] - model.parameters[i]);
                local[i] -= cfg.lr * g;
            }
        }
    }
    result.delta.resize(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) result.delta[i] = model.parameters[i] - local[i];
    return result;
}

// ---------------------------------------------------------------------------
// Server optimizers

enum class ServerOptimizerKind { SGD, Adam, Yogi, Adagrad };

inline std::string_view to_string(ServerOptimizerKind k) {
    switch (k) {
        case ServerOptimizerKind::SGD: return "SGD";
        case ServerOptimizerKind::Adam: return "Adam";
        case ServerOptimizerKind::Yogi: return "Yogi";
        case ServerOptimizerKind::Adagrad: return "Adagrad";
    }
    return "?";
}

inline std::optional<ServerOptimizerKind> server_optimizer_from_string(std::string_view s) {
    for (auto k : {ServerOptimizerKind::SGD, ServerOptimizerKind::Adam, ServerOptimizerKind::Yogi,
                   ServerOptimizerKind::Adagrad})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

struct ServerOptimizerSettings {
    ServerOptimizerKind kind = ServerOptimizerKind::SGD;
    double lr = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double tau = 1e-3;

    friend bool operator==(const ServerOptimizerSettings&, const ServerOptimizerSettings&) = default;
};

/// Applies the mixed client delta as a pseudo-gradient g:
///   SGD      theta -= lr g
///   adaptive m = b1 m + (1 - b1) g, v per kind, theta -= lr m / (sqrt(v) + tau)
/// with v_Adam = b2 v + (1 - b2) g^2, v_Yogi = v - (1 - b2) g^2 sign(v - g^2), v_Adagrad = v + g^2.
class ServerOptimizer {
 public:
    explicit ServerOptimizer(ServerOptimizerSettings settings = {}) : settings_(settings) {
        if (!(settings.lr > 0.0)) throw DomainError("server optimizer: lr must be positive");
        if (settings.beta1 < 0.0 || settings.beta1 >= 1.0 || settings.beta2 < 0.0 || settings.beta2 >= 1.0)
            throw DomainError("server optimizer: betas must lie in [0, 1)");
        if (!(settings.tau > 0.0)) throw DomainError("server optimizer: tau must be positive");
    }

    const ServerOptimizerSettings& settings() const noexcept { return settings_; }
    std::span<const double> first_moment() const noexcept { return m_; }
    std::span<const double> second_moment() const noexcept { return v_; }

    void apply(GlobalModel& model, std::span<const double> g) {
        const std::size_t d = model.parameters.size();
        if (g.size() != d) throw InvalidDimensionError("server_apply: delta length mismatch");
        const auto& s = settings_;
        if (s.kind == ServerOptimizerKind::SGD) {
            for (std::size_t i = 0; i < d; ++i) model.parameters[i] -= s.lr * g[i];
            return;
        }
        if (m_.empty()) {
            m_.assign(d, 0.0);
            v_.assign(d, 0.0);
        }
        if (m_.size() != d) throw InvalidDimensionError("server_apply: optimizer state length mismatch");
        for (std::size_t i = 0; i < d; ++i) {
            const double g2 = g[i] * g[i];
            m_[i] = s.beta1 * m_[i] + (1.0 - s.beta1) * g[i];
            switch (s.kind) {
                case ServerOptimizerKind::Adam: v_[i] = s.beta2 * v_[i] + (1.0 - s.beta2) * g2; break;
                case ServerOptimizerKind::Yogi: {
                    const double diff = v_[i] - g2;
                    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                    v_[i] = v_[i] - (1.0 - s.beta2) * g2 * sign;
                    break;
                }
                case ServerOptimizerKind::Adagrad: v_[i] += g2; break;
                case ServerOptimizerKind::SGD: break;
            }
            model.parameters[i] -= s.lr * m_[i] / (std::sqrt(v_[i]) + s.tau);
        }
    }

 private:
    ServerOptimizerSettings settings_;
    std::vector<double> m_, v_;
};

inline GlobalModel server_apply(GlobalModel model, std::span<const double> mixed_delta, ServerOptimizer& opt) {
    opt.apply(model, mixed_delta);
    return model;
}

// ---------------------------------------------------------------------------
// Orchestration

struct ClientData {
    Dataset train;
    Dataset test;  ///< may be empty; evaluation then falls back to `train`
};

/// Everything needed to run one seeded simulation.
struct SimulationSetup {
    ModelSpec model;
    std::vector<ClientData> clients;
    AggregatorMethod method;
    CdfKind cdf = CdfKind::with_defaults(CdfFamily::Normal);
    ResponseBounds bounds{0.0, 1.0};
    double C = 1.0;
    LocalTraining local;
    double lr_decay = 0.99;      ///< multiplicative local learning rate decay ...
    std::size_t decay_step = 10; ///< ... applied every decay_step rounds
    ServerOptimizerSettings server;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool evaluate = true;
};

struct RoundReport {
    std::size_t round = 0;                 ///< 1-based
    std::vector<std::size_t> sampled;      ///< clients that reported, ascending
    std::vector<std::size_t> dropped;      ///< sampled clients whose update failed
    std::vector<double> feedback;          ///< per reporting client
    double mean_feedback = 0.0;
    std::vector<double> responses;         ///< per reporting client
    double decision_loss = 0.0;
    std::vector<double> decision;          ///< K-length decision after this round
    std::vector<double> mixing;            ///< per reporting client, sums to one
    std::vector<double> client_accuracy;   ///< per client, after the model update
    PerformanceSummary eval;
};

/// Splits every client's samples into train and test parts (test gets floor(frac * n_i)).
inline std::vector<ClientData> split_clients(const std::vector<Dataset>& shards, double test_fraction,
                                             std::uint64_t seed) {
    std::vector<ClientData> out;
    out.reserve(shards.size());
    for (std::size_t k = 0; k < shards.size(); ++k) {
        const auto& shard = shards[k];
        std::vector<std::size_t> idx(shard.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng = make_rng(seed, Stream::Split, k);
        std::shuffle(idx.begin(), idx.end(), rng);
        auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(shard.size())));
        n_test = std::min(n_test, shard.size() - 1);
        std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
        std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
        std::sort(test.begin(), test.end());
        std::sort(train.begin(), train.end());
        out.push_back({shard.subset(train), shard.subset(test)});
    }
    return out;
}

class Simulation {
 public:
    explicit Simulation(SimulationSetup setup)
        : setup_(std::move(setup)),
          aggregator_(setup_.method, setup_.clients.size(), setup_.bounds, setup_.C),
          server_(setup_.server) {
        if (setup_.clients.empty()) throw InvalidDimensionError("simulation: no clients");
        setup_.model.validate();
        for (const auto& c : setup_.clients)
            if (c.train.size() == 0) throw DegenerateInputError("simulation: client without training data");
        Rng init = make_rng(setup_.seed, Stream::Init);
        model_.parameters = init_params(setup_.model, init);
    }

    std::size_t num_clients() const noexcept { return setup_.clients.size(); }
    std::size_t rounds_done() const noexcept { return round_; }
    const GlobalModel& model() const noexcept { return model_; }
    const Aggregator& aggregator() const noexcept { return aggregator_; }
    const SimulationSetup& setup() const noexcept { return setup_; }

    /// Local learning rate in force for 0-based round t.
    double local_lr(std::size_t t) const {
        const std::size_t step = std::max<std::size_t>(1, setup_.decay_step);
        return setup_.local.lr * std::pow(setup_.lr_decay, static_cast<double>(t / step));
    }

    std::vector<double> evaluate_clients() const {
        std::vector<double> acc(num_clients());
        for (std::size_t k = 0; k < num_clients(); ++k) {
            const auto& c = setup_.clients[k];
            acc[k] = accuracy(setup_.model, model_.parameters, c.test.size() > 0 ? c.test : c.train);
        }
        return acc;
    }

    RoundReport run_round() {
        const std::size_t t = round_;
        const std::size_t K = num_clients();
        RoundReport report;
        report.round = t + 1;

        Rng sampler = make_rng(setup_.seed, Stream::Sampling, t);
        const auto sampled = sample_clients(K, setup_.C, sampler);

        LocalTraining local = setup_.local;
        local.lr = local_lr(t);
        auto results = run_clients(sampled, local, t);

        std::vector<ClientUpdateResult> ok;
        for (std::size_t k = 0; k < sampled.size(); ++k) {
            if (results[k]) {
                ok.push_back(std::move(*results[k]));
            } else {
                report.dropped.push_back(sampled[k]);
            }
        }
        if (ok.empty()) {
            warn("round " + std::to_string(t + 1) + ": every sampled client failed; model unchanged");
            report.decision = aggregator_.decision().vector();
            finish(report);
            return report;
        }

        std::vector<std::size_t> n(ok.size());
        for (std::size_t k = 0; k < ok.size(); ++k) {
            report.sampled.push_back(ok[k].client_id);
            report.feedback.push_back(ok[k].feedback_loss);
            n[k] = ok[k].sample_count;
        }
        report.mean_feedback =
            std::accumulate(report.feedback.begin(), report.feedback.end(), 0.0) / static_cast<double>(ok.size());

        if (report.mean_feedback > 0.0) {
            report.responses = transform_losses(report.feedback, setup_.cdf, setup_.bounds);
        } else {
            warn("round " + std::to_string(t + 1) + ": all feedback losses are zero; responses set to c1");
            report.responses.assign(ok.size(), setup_.bounds.c1());
        }
        ResponseVector response{std::vector<double>(K, 0.0), std::vector<bool>(K, false)};
        for (std::size_t k = 0; k < ok.size(); ++k) {
            response.values[report.sampled[k]] = report.responses[k];
            response.observed[report.sampled[k]] = true;
        }

        auto agg = aggregator_.step({report.sampled, n, report.feedback, response});
        report.decision_loss = agg.decision_loss;
        report.decision = agg.decision.vector();
        report.mixing = std::move(agg.mixing);

        std::vector<double> mixed(model_.parameters.size(), 0.0);
        for (std::size_t k = 0; k < ok.size(); ++k)  // ascending client id
            for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += report.mixing[k] * ok[k].delta[i];
        server_.apply(model_, mixed);
        if (!model_.finite())
            throw DivergenceError("global model diverged in round " + std::to_string(t + 1), 0, t + 1);

        finish(report);
        return report;
    }

    std::vector<RoundReport> run(std::size_t T) {
        std::vector<RoundReport> reports;
        reports.reserve(T);
        for (std::size_t t = 0; t < T; ++t) reports.push_back(run_round());
        return reports;
    }

 private:
    void finish(RoundReport& report) {
        if (setup_.evaluate) {
            report.client_accuracy = evaluate_clients();
            report.eval = performance_summary(report.client_accuracy);
        }
        ++round_;
    }

    std::vector<std::optional<ClientUpdateResult>> run_clients(const std::vector<std::size_t>& sampled,
                                                               const LocalTraining& local, std::size_t t) {
        std::vector<std::optional<ClientUpdateResult>> results(sampled.size());
        std::vector<std::exception_ptr> errors(sampled.size());
        auto work = [&](std::size_t k) {
            const std::size_t id = sampled[k];
            Rng rng = make_rng(setup_.seed, Stream::Client, t, id);
            try {
                results[k] = client_update(setup_.model, model_, setup_.clients[id].train, local, rng, id, t + 1);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        };
        const std::size_t workers = std::min(std::max<std::size_t>(1, setup_.threads), sampled.size());
        if (workers <= 1) {
            for (std::size_t k = 0; k < sampled.size(); ++k) work(k);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    for (std::size_t k = w; k < sampled.size(); k += workers) work(k);
                });
            for (auto& th : pool) th.join();
        }
        for (std::size_t k = 0; k < sampled.size(); ++k) {
            if (!errors[k]) continue;
            try {
                std::rethrow_exception(errors[k]);
            } catch (const DivergenceError& e) {
                warn(std::string(e.what()) + "; dropping client " + std::to_string(sampled[k]) + " from round " +
                     std::to_string(t + 1));
            }
        }
        return results;
    }

    SimulationSetup setup_;
    Aggregator aggregator_;
    ServerOptimizer server_;
    GlobalModel model_;
    std::size_t round_ = 0;
};

}  // namespace fairmix
