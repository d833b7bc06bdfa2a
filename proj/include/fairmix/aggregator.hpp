#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fairmix/decision.hpp"
#include "fairmix/error.hpp"
#include "fairmix/response.hpp"
#include "fairmix/simplex.hpp"

namespace fairmix {

enum class MethodKind { Static, AFL, QFedAvg, TERM, PropFair, AAggFFS, AAggFFD };

inline std::string_view to_string(MethodKind k) {
    switch (k) {
        case MethodKind::Static: return "Static";
        case MethodKind::AFL: return "AFL";
        case MethodKind::QFedAvg: return "QFedAvg";
        case MethodKind::TERM: return "TERM";
        case MethodKind::PropFair: return "PropFair";
        case MethodKind::AAggFFS: return "AAggFFS";
        case MethodKind::AAggFFD: return "AAggFFD";
    }
    return "?";
}

inline std::optional<MethodKind> method_kind_from_string(std::string_view s) {
    for (auto k : {MethodKind::Static, MethodKind::AFL, MethodKind::QFedAvg, MethodKind::TERM,
                   MethodKind::PropFair, MethodKind::AAggFFS, MethodKind::AAggFFD})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

/// A mixing-coefficient rule and its hyperparameter (q, lambda or M; unused otherwise).
struct AggregatorMethod {
    MethodKind kind = MethodKind::Static;
    double q = 1.0;        ///< QFedAvg fairness magnitude, >= 0
    double lambda = 1.0;   ///< TERM tilting constant
    double prop_m = 2.0;   ///< PropFair baseline constant, > max loss

    static AggregatorMethod make_static() { return {MethodKind::Static}; }
    static AggregatorMethod afl() { return {MethodKind::AFL}; }
    static AggregatorMethod qfedavg(double q) { return {MethodKind::QFedAvg, q}; }
    static AggregatorMethod term(double lambda) { return {MethodKind::TERM, 1.0, lambda}; }
    static AggregatorMethod propfair(double m) { return {MethodKind::PropFair, 1.0, 1.0, m}; }
    static AggregatorMethod aaggff_s() { return {MethodKind::AAggFFS}; }
    static AggregatorMethod aaggff_d() { return {MethodKind::AAggFFD}; }

    bool is_baseline() const { return kind != MethodKind::AAggFFS && kind != MethodKind::AAggFFD; }

    friend bool operator==(const AggregatorMethod&, const AggregatorMethod&) = default;
};

namespace detail {

/// softmax of log-weights with max subtraction; -inf entries get zero mass.
inline std::optional<std::vector<double>> normalize_log_weights(std::span<const double> logw) {
    const double mx = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(mx)) return std::nullopt;
    std::vector<double> w(logw.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        w[i] = std::exp(logw[i] - mx);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

inline void check_baseline_inputs(std::span<const std::size_t> n, std::span<const double> F) {
    if (n.empty()) throw InvalidDimensionError("baseline_coefficients: no clients");
    if (n.size() != F.size()) throw InvalidDimensionError("baseline_coefficients: size mismatch");
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] == 0) throw DomainError("baseline_coefficients: sample sizes must be positive");
        if (!(F[i] >= 0.0) || !std::isfinite(F[i]))
            throw DomainError("baseline_coefficients: losses must be finite and nonnegative");
    }
}

}  // namespace detail

/// Closed-form mixing coefficients of the stateless baselines.
///
/// Static p ~ n, QFedAvg p ~ n F^q, TERM p ~ n exp(lambda F), PropFair p ~ n / (M - F),
/// AFL uniform over the argmax-loss set. All-zero weights fall back to Static with a warning.
inline Decision baseline_coefficients(const AggregatorMethod& method,
                                      std::span<const std::size_t> sample_sizes,
                                      std::span<const double> losses) {
    detail::check_baseline_inputs(sample_sizes, losses);
    const std::size_t K = sample_sizes.size();
    std::vector<double> logw(K);
    for (std::size_t i = 0; i < K; ++i) logw[i] = std::log(static_cast<double>(sample_sizes[i]));

    switch (method.kind) {
        case MethodKind::Static: break;
        case MethodKind::QFedAvg:
            if (method.q < 0.0) throw DomainError("QFedAvg: q must be nonnegative");
            if (method.q > 0.0)
                for (std::size_t i = 0; i < K; ++i) logw[i] += method.q * std::log(losses[i]);
            break;
        case MethodKind::TERM:
            for (std::size_t i = 0; i < K; ++i) logw[i] += method.lambda * losses[i];
            break;
        case MethodKind::PropFair: {
            const double fmax = *std::max_element(losses.begin(), losses.end());
            if (!(method.prop_m > fmax))
                throw DomainError("PropFair: M must exceed the largest loss");
            for (std::size_t i = 0; i < K; ++i) logw[i] -= std::log(method.prop_m - losses[i]);
            break;
        }
        case MethodKind::AFL: {
            const double fmax = *std::max_element(losses.begin(), losses.end());
            for (std::size_t i = 0; i < K; ++i)
                logw[i] = losses[i] == fmax ? 0.0 : -std::numeric_limits<double>::infinity();
            break;
        }
        case MethodKind::AAggFFS:
        case MethodKind::AAggFFD:
            throw DomainError("baseline_coefficients: stateful methods have no closed form");
    }

    if (auto w = detail::normalize_log_weights(logw)) return Decision(std::move(*w));
    warn(std::string(to_string(method.kind)) + ": all mixing weights are zero; using Static");
    return baseline_coefficients(AggregatorMethod::make_static(), sample_sizes, losses);
}

/// Exponentiated-gradient step p'_i ~ prev_i exp(response_i / step).
inline Decision eg_unified_step(const Decision& prev, std::span<const double> response, double step) {
    if (prev.size() != response.size()) throw InvalidDimensionError("eg_unified_step: size mismatch");
    if (!(step > 0.0)) throw DomainError("eg_unified_step: step must be positive");
    std::vector<double> logw(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const double lp = prev[i] > 0.0 ? std::log(prev[i]) : -std::numeric_limits<double>::infinity();
        logw[i] = lp + response[i] / step;
        if (std::isnan(logw[i])) throw DomainError("eg_unified_step: response is NaN");
    }
    auto w = detail::normalize_log_weights(logw);
    if (!w) throw DegenerateInputError("eg_unified_step: every coordinate has zero weight");
    return Decision(std::move(*w));
}

/// The (last decision, response, step size) triple that expresses a baseline as one
/// exponentiated-gradient step.
struct UnifiedForm {
    Decision last_decision;
    std::vector<double> response;
    double step;
};

/// AFL is expressed as the q -> infinity limit of QFedAvg from a uniform prior:
/// response 0 on the argmax-loss set and -infinity elsewhere.
inline UnifiedForm unified_form(const AggregatorMethod& method, std::span<const std::size_t> n,
                                std::span<const double> F) {
    detail::check_baseline_inputs(n, F);
    const std::size_t K = n.size();
    double total = 0.0;
    for (auto ni : n) total += static_cast<double>(ni);
    std::vector<double> prior(K);
    for (std::size_t i = 0; i < K; ++i) prior[i] = static_cast<double>(n[i]) / total;
    // one exact renormalization so the prior is a valid Decision
    double s = 0.0;
    for (double x : prior) s += x;
    for (double& x : prior) x /= s;

    std::vector<double> response(K, 0.0);
    double step = 1.0;
    switch (method.kind) {
        case MethodKind::Static: break;
        case MethodKind::QFedAvg:
            if (method.q > 0.0)
                for (std::size_t i = 0; i < K; ++i) response[i] = method.q * std::log(F[i]);
            break;
        case MethodKind::TERM:
            if (method.lambda > 0.0) {
                for (std::size_t i = 0; i < K; ++i) response[i] = F[i];
                step = 1.0 / method.lambda;
            } else if (method.lambda < 0.0) {
                for (std::size_t i = 0; i < K; ++i) response[i] = -F[i];
                step = -1.0 / method.lambda;
            }
            break;
        case MethodKind::PropFair:
            for (std::size_t i = 0; i < K; ++i) response[i] = -std::log(method.prop_m - F[i]);
            break;
        case MethodKind::AFL: {
            const double fmax = *std::max_element(F.begin(), F.end());
            for (std::size_t i = 0; i < K; ++i)
                response[i] = F[i] == fmax ? 0.0 : -std::numeric_limits<double>::infinity();
            return {uniform_decision(K), std::move(response), 1.0};
        }
        case MethodKind::AAggFFS:
        case MethodKind::AAggFFD:
            throw DomainError("unified_form: stateful methods have no single-step form");
    }
    return {Decision(std::move(prior)), std::move(response), step};
}

/// Persistent state of the online Newton step aggregator.
struct OnsState {
    std::size_t round = 0;
    std::vector<double> grad_sum;   ///< sum of gradients
    PsdMatrix mat;                  ///< alpha I + beta sum g g^T
    std::vector<double> mat_inv;    ///< maintained by rank-one updates
    std::vector<double> rhs;        ///< beta sum <g, p> g
    double alpha;
    double beta;
    Decision last_decision;

    /// alpha = 4 K l_inf, beta = 1 / (4 l_inf).
    static OnsState initial(std::size_t K, double l_inf) {
        if (K == 0) throw InvalidDimensionError("OnsState: K must be positive");
        if (!(l_inf > 0.0)) throw DomainError("OnsState: l_inf must be positive");
        const double alpha = 4.0 * static_cast<double>(K) * l_inf;
        auto mat = PsdMatrix::scaled_identity(K, alpha);
        auto inv = mat.inverse();
        return OnsState{0,     std::vector<double>(K, 0.0), std::move(mat), std::move(inv),
                        std::vector<double>(K, 0.0), alpha, 1.0 / (4.0 * l_inf),
                        uniform_decision(K)};
    }

    std::size_t dim() const { return grad_sum.size(); }
};

inline constexpr std::size_t kOnsRefactorInterval = 64;

/// One online Newton step: absorbs the gradient at `state.last_decision` and returns the
/// minimizer of the accumulated linearized losses plus the proximal quadratic regularizer.
inline std::pair<OnsState, Decision> aaggff_s_step(OnsState state, std::span<const double> gradient,
                                                   SolverOptions opts = {}) {
    const std::size_t K = state.dim();
    if (gradient.size() != K) throw InvalidDimensionError("aaggff_s_step: size mismatch");
    if (K == 1) {
        ++state.round;
        return {std::move(state), Decision({1.0})};
    }
    const double c = dot(gradient, state.last_decision.weights());
    for (std::size_t i = 0; i < K; ++i) {
        state.grad_sum[i] += gradient[i];
        state.rhs[i] += state.beta * c * gradient[i];
    }
    state.mat.add_outer(state.beta, gradient);
    ++state.round;

    if (state.round % kOnsRefactorInterval == 0) {
        state.mat_inv = state.mat.inverse();
    } else {
        // Sherman-Morrison
        std::vector<double> u(K, 0.0);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) u[i] += state.mat_inv[i * K + j] * gradient[j];
        const double denom = 1.0 + state.beta * dot(gradient, u);
        if (!(denom > 0.0)) throw InvariantError("aaggff_s_step: ONS matrix lost definiteness");
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                state.mat_inv[i * K + j] -= state.beta * u[i] * u[j] / denom;
    }

    std::vector<double> b(K);
    for (std::size_t i = 0; i < K; ++i) b[i] = state.rhs[i] - state.grad_sum[i];
    std::vector<double> center(K, 0.0);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) center[i] += state.mat_inv[i * K + j] * b[j];

    Decision next = project_generalized(center, state.mat, opts);
    state.last_decision = next;
    return {std::move(state), std::move(next)};
}

/// Persistent state of the closed-form FTRL (entropic) aggregator.
struct FtrlState {
    std::size_t round = 0;
    std::vector<double> cum_grad;
    double lipschitz;  ///< gradient bound used in the step size
    std::size_t K;

    static FtrlState initial(std::size_t K, double lipschitz) {
        if (K == 0) throw InvalidDimensionError("FtrlState: K must be positive");
        if (!(lipschitz > 0.0)) throw DomainError("FtrlState: lipschitz constant must be positive");
        return {0, std::vector<double>(K, 0.0), lipschitz, K};
    }

    /// zeta = L sqrt(t + 1) / sqrt(log K) for t accumulated gradients.
    double step_size() const {
        return lipschitz * std::sqrt(static_cast<double>(round) + 1.0) /
               std::sqrt(std::log(static_cast<double>(K)));
    }

    /// Closed-form minimizer of <p, cum_grad> + step_size() * sum p log p.
    Decision decision() const {
        if (K == 1) return Decision({1.0});
        const double zeta = step_size();
        std::vector<double> logw(K);
        for (std::size_t i = 0; i < K; ++i) logw[i] = -cum_grad[i] / zeta;
        auto w = detail::normalize_log_weights(logw);
        if (!w) throw NumericalFailureError("aaggff_d_step: non-finite cumulative gradient");
        return Decision(std::move(*w));
    }
};

inline std::pair<FtrlState, Decision> aaggff_d_step(FtrlState state,
                                                    std::span<const double> dr_gradient) {
    if (dr_gradient.size() != state.K) throw InvalidDimensionError("aaggff_d_step: size mismatch");
    for (std::size_t i = 0; i < state.K; ++i) {
        state.cum_grad[i] += dr_gradient[i];
        if (!std::isfinite(state.cum_grad[i]))
            throw NumericalFailureError("aaggff_d_step: non-finite cumulative gradient");
    }
    ++state.round;
    Decision next = state.decision();
    return {std::move(state), std::move(next)};
}

/// Renormalizes p over the selected clients, in the order given.
inline std::vector<double> normalize_selected(const Decision& p, std::span<const std::size_t> selected) {
    if (selected.empty()) throw InvalidDimensionError("normalize_selected: empty selection");
    double mass = 0.0;
    for (auto i : selected) {
        if (i >= p.size()) throw InvalidDimensionError("normalize_selected: index out of range");
        mass += p[i];
    }
    std::vector<double> out(selected.size());
    if (!(mass > 0.0)) {
        warn("normalize_selected: selected clients carry no mass; mixing uniformly");
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(selected.size()));
        return out;
    }
    for (std::size_t k = 0; k < selected.size(); ++k) out[k] = p[selected[k]] / mass;
    return out;
}

/// What the server observed in one round. Per-client vectors are aligned with `sampled`,
/// which is sorted ascending. `response` spans all K clients.
struct RoundSignal {
    std::span<const std::size_t> sampled;
    std::span<const std::size_t> sample_sizes;
    std::span<const double> losses;
    const ResponseVector& response;
};

struct AggregationResult {
    double decision_loss;        ///< loss of the decision in force before this round
    Decision decision;           ///< new K-length decision
    std::vector<double> mixing;  ///< coefficients over the sampled clients
};

/// Every mixing rule behind one stateful interface.
class Aggregator {
 public:
    Aggregator(AggregatorMethod method, std::size_t K, ResponseBounds bounds, double C)
        : method_(method), K_(K), bounds_(bounds), C_(C), decision_(uniform_decision(K)) {
        if (!(C > 0.0) || C > 1.0) throw DomainError("Aggregator: C must lie in (0, 1]");
        const auto lip = lipschitz_constants(bounds, C);
        switch (method.kind) {
            case MethodKind::AAggFFS:
                if (C < 1.0) throw DomainError("AAggFFS requires full participation (C = 1)");
                state_ = OnsState::initial(K, lip.l_inf);
                break;
            case MethodKind::AAggFFD:
                state_ = FtrlState::initial(K, C < 1.0 ? lip.l_inf_dr : lip.l_inf);
                break;
            default: break;
        }
    }

    const AggregatorMethod& method() const noexcept { return method_; }
    const Decision& decision() const noexcept { return decision_; }
    std::size_t num_clients() const noexcept { return K_; }

    AggregationResult step(const RoundSignal& signal) {
        if (signal.response.size() != K_) throw InvalidDimensionError("Aggregator: response size");
        if (signal.sampled.empty()) throw DegenerateInputError("Aggregator: no clients reported");

        const double rbar = signal.response.observed_mean();
        const bool full = signal.response.observed_count() == K_;
        std::vector<double> imputed(K_);
        for (std::size_t i = 0; i < K_; ++i)
            imputed[i] = signal.response.observed[i] ? signal.response.values[i] : rbar;
        const double loss = decision_loss(decision_, imputed);

        if (method_.is_baseline()) {
            Decision local = baseline_coefficients(method_, signal.sample_sizes, signal.losses);
            std::vector<double> full_p(K_, 0.0);
            for (std::size_t k = 0; k < signal.sampled.size(); ++k) full_p[signal.sampled[k]] = local[k];
            decision_ = Decision(std::move(full_p));
            return {loss, decision_, local.vector()};
        }

        if (auto* ons = std::get_if<OnsState>(&state_)) {
            const auto g = decision_grad(decision_, imputed);
            auto [next_state, next] = aaggff_s_step(std::move(*ons), g);
            *ons = std::move(next_state);
            decision_ = std::move(next);
        } else if (auto* ftrl = std::get_if<FtrlState>(&state_)) {
            std::vector<double> g;
            if (full) {
                g = decision_grad(decision_, signal.response.values);
            } else {
                const auto r_dr = dr_response(signal.response, C_);
                g = linearized_grad(r_dr, decision_, rbar);
            }
            auto [next_state, next] = aaggff_d_step(std::move(*ftrl), g);
            *ftrl = std::move(next_state);
            decision_ = std::move(next);
        } else {
            throw InvariantError("Aggregator: missing state for stateful method");
        }
        return {loss, decision_, normalize_selected(decision_, signal.sampled)};
    }

 private:
    AggregatorMethod method_;
    std::size_t K_;
    ResponseBounds bounds_;
    double C_;
    Decision decision_;
    std::variant<std::monostate, OnsState, FtrlState> state_;
};

}  // namespace fairmix
