#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fairmix/error.hpp"
#include "fairmix/response.hpp"
#include "fairmix/simplex.hpp"

namespace fairmix {

/// Negative logarithmic growth -log(1 + <p, r>).
inline double decision_loss(const Decision& p, std::span<const double> r) {
    if (p.size() != r.size()) throw InvalidDimensionError("decision_loss: dimension mismatch");
    const double pr = dot(p.weights(), r);
    if (!(1.0 + pr > 0.0)) throw DomainError("decision_loss: 1 + <p, r> must be positive");
    return -std::log1p(pr);
}

/// Gradient of decision_loss in p: -r / (1 + <p, r>).
inline std::vector<double> decision_grad(const Decision& p, std::span<const double> r) {
    if (p.size() != r.size()) throw InvalidDimensionError("decision_grad: dimension mismatch");
    const double growth = 1.0 + dot(p.weights(), r);
    if (!(growth > 0.0)) throw DomainError("decision_grad: 1 + <p, r> must be positive");
    std::vector<double> g(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) g[i] = -r[i] / growth;
    return g;
}

struct DecisionLossRecord {
    std::size_t round = 0;
    double loss = 0.0;
    std::vector<double> gradient;

    static DecisionLossRecord evaluate(std::size_t round, const Decision& p,
                                       std::span<const double> r) {
        return {round, decision_loss(p, r), decision_grad(p, r)};
    }
};

/// Doubly-robust completion of a partially observed response vector.
///
/// Observed entries become (1 - 1/C) rbar + r_i / C, unobserved ones rbar, where rbar is the
/// mean over observed entries and C the client sampling probability.
inline std::vector<double> dr_response(const ResponseVector& raw, double C) {
    if (raw.values.size() != raw.observed.size())
        throw InvalidDimensionError("dr_response: values/observed size mismatch");
    if (!(C > 0.0) || C > 1.0) throw DomainError("dr_response: C must lie in (0, 1]");
    const double rbar = raw.observed_mean();
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        out[i] = raw.observed[i] ? (1.0 - 1.0 / C) * rbar + raw.values[i] / C : rbar;
    return out;
}

/// First-order expansion of decision_grad in the response around r0 = r0_scalar * 1.
inline std::vector<double> linearized_grad(std::span<const double> r_hat, const Decision& p,
                                           double r0_scalar) {
    if (p.size() != r_hat.size()) throw InvalidDimensionError("linearized_grad: dimension mismatch");
    double p_sum = 0.0, p_dot_rhat = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p_sum += p[i];
        p_dot_rhat += p[i] * r_hat[i];
    }
    const double denom = 1.0 + r0_scalar * p_sum;  // 1 + <p, r0>
    if (!(denom > 0.0)) throw DomainError("linearized_grad: 1 + <p, r0> must be positive");
    const double shift = r0_scalar * (p_dot_rhat - r0_scalar * p_sum) / (denom * denom);
    std::vector<double> g(r_hat.size());
    for (std::size_t i = 0; i < r_hat.size(); ++i) g[i] = -r_hat[i] / denom + shift;
    return g;
}

struct LipschitzConstants {
    double l_inf;       ///< bound on ||decision_grad||_inf
    double l_inf_dr;    ///< bound on ||linearized_grad(dr_response)||_inf
    double sampling_c;
};

inline LipschitzConstants lipschitz_constants(const ResponseBounds& bounds, double C) {
    if (!(C > 0.0) || C > 1.0) throw DomainError("lipschitz_constants: C must lie in (0, 1]");
    const double l_inf = bounds.c2() / (1.0 + bounds.c1());
    const double l_inf_dr = l_inf + 2.0 * bounds.width() / (C * (1.0 + bounds.c1()));
    return {l_inf, l_inf_dr, C};
}

}  // namespace fairmix
