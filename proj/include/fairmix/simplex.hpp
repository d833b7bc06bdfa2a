#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairmix/error.hpp"

namespace fairmix {

/// Absolute tolerance on the sum of a Decision's weights.
inline constexpr double kSimplexSumTolerance = 1e-9;

/// A point on the probability simplex: K >= 1 nonnegative weights summing to one.
class Decision {
 public:
    /// Validates the weights; throws InvalidDimensionError or DomainError.
    explicit Decision(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) throw InvalidDimensionError("decision must have at least one entry");
        double sum = 0.0;
        for (double w : weights_) {
            if (!std::isfinite(w) || w < 0.0)
                throw DomainError("decision entries must be finite and nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > kSimplexSumTolerance)
            throw DomainError("decision entries must sum to 1 (got " + std::to_string(sum) + ")");
    }

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const noexcept { return weights_; }
    const std::vector<double>& vector() const noexcept { return weights_; }

    auto begin() const noexcept { return weights_.begin(); }
    auto end() const noexcept { return weights_.end(); }

    friend bool operator==(const Decision&, const Decision&) = default;

 private:
    std::vector<double> weights_;
};

inline Decision uniform_decision(std::size_t K) {
    if (K == 0) throw InvalidDimensionError("uniform_decision: K must be positive");
    return Decision(std::vector<double>(K, 1.0 / static_cast<double>(K)));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidDimensionError("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Dense symmetric positive definite K x K matrix, row-major.
class PsdMatrix {
 public:
    /// alpha * I; alpha must be positive.
    static PsdMatrix scaled_identity(std::size_t K, double alpha) {
        if (K == 0) throw InvalidDimensionError("PsdMatrix: K must be positive");
        if (!(alpha > 0.0)) throw DomainError("PsdMatrix: alpha must be positive");
        PsdMatrix m(K);
        for (std::size_t i = 0; i < K; ++i) m.at(i, i) = alpha;
        return m;
    }

    /// Checks symmetry (1e-12) and positive definiteness via Cholesky.
    static PsdMatrix from_entries(std::size_t K, std::vector<double> entries) {
        if (K == 0 || entries.size() != K * K)
            throw InvalidDimensionError("PsdMatrix: entries must have K*K elements");
        PsdMatrix m(K);
        m.entries_ = std::move(entries);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = i + 1; j < K; ++j)
                if (std::abs(m.at(i, j) - m.at(j, i)) > 1e-12)
                    throw DomainError("PsdMatrix: matrix is not symmetric");
        m.cholesky();  // throws when not positive definite
        return m;
    }

    std::size_t dim() const noexcept { return K_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * K_ + j]; }
    std::span<const double> entries() const noexcept { return entries_; }

    /// this += scale * v v^T
    void add_outer(double scale, std::span<const double> v) {
        if (v.size() != K_) throw InvalidDimensionError("PsdMatrix::add_outer: dimension mismatch");
        for (std::size_t i = 0; i < K_; ++i)
            for (std::size_t j = 0; j < K_; ++j) at(i, j) += scale * v[i] * v[j];
    }

    std::vector<double> multiply(std::span<const double> v) const {
        if (v.size() != K_) throw InvalidDimensionError("PsdMatrix::multiply: dimension mismatch");
        std::vector<double> out(K_, 0.0);
        for (std::size_t i = 0; i < K_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < K_; ++j) s += at(i, j) * v[j];
            out[i] = s;
        }
        return out;
    }

    /// Lower-triangular Cholesky factor L with this = L L^T.
    std::vector<double> cholesky() const {
        std::vector<double> L(K_ * K_, 0.0);
        for (std::size_t j = 0; j < K_; ++j) {
            double d = at(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= L[j * K_ + k] * L[j * K_ + k];
            if (!(d > 0.0)) throw DomainError("PsdMatrix: matrix is not positive definite");
            const double ljj = std::sqrt(d);
            L[j * K_ + j] = ljj;
            for (std::size_t i = j + 1; i < K_; ++i) {
                double s = at(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= L[i * K_ + k] * L[j * K_ + k];
                L[i * K_ + j] = s / ljj;
            }
        }
        return L;
    }

    /// Explicit inverse through the Cholesky factor.
    std::vector<double> inverse() const {
        const auto L = cholesky();
        std::vector<double> inv(K_ * K_, 0.0);
        std::vector<double> col(K_);
        for (std::size_t c = 0; c < K_; ++c) {
            // forward: L y = e_c
            for (std::size_t i = 0; i < K_; ++i) {
                double s = (i == c) ? 1.0 : 0.0;
                for (std::size_t k = 0; k < i; ++k) s -= L[i * K_ + k] * col[k];
                col[i] = s / L[i * K_ + i];
            }
            // backward: L^T x = y
            for (std::size_t ii = K_; ii-- > 0;) {
                double s = col[ii];
                for (std::size_t k = ii + 1; k < K_; ++k) s -= L[k * K_ + ii] * col[k];
                col[ii] = s / L[ii * K_ + ii];
            }
            for (std::size_t i = 0; i < K_; ++i) inv[i * K_ + c] = col[i];
        }
        return inv;
    }

 private:
    explicit PsdMatrix(std::size_t K) : K_(K), entries_(K * K, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return entries_[i * K_ + j]; }
    double at(std::size_t i, std::size_t j) const { return entries_[i * K_ + j]; }

    std::size_t K_;
    std::vector<double> entries_;
};

/// Euclidean projection onto the simplex (sort-and-threshold).
inline std::vector<double> project_euclidean(std::span<const double> q) {
    if (q.empty()) throw InvalidDimensionError("project_euclidean: empty vector");
    std::vector<double> sorted(q.begin(), q.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumsum += sorted[j];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - t > 0.0) theta = t;
    }
    std::vector<double> p(q.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        p[i] = std::max(q[i] - theta, 0.0);
        sum += p[i];
    }
    // one renormalization pass absorbs accumulated rounding in theta
    if (sum > 0.0)
        for (double& x : p) x /= sum;
    return p;
}

/// Largest gap between the gradient on the support and the smallest gradient entry.
/// Zero exactly at a KKT point of a convex problem over the simplex.
inline double kkt_residual(std::span<const double> p, std::span<const double> grad,
                           double support_tol) {
    if (p.size() != grad.size()) throw InvalidDimensionError("kkt_residual: dimension mismatch");
    const double gmin = *std::min_element(grad.begin(), grad.end());
    double residual = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > support_tol) residual = std::max(residual, grad[i] - gmin);
    return residual;
}

struct SolverOptions {
    double tol = 1e-9;
    std::size_t max_iterations = 10'000;
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Minimizes a convex differentiable objective over the simplex by projected gradient
/// with Barzilai-Borwein step proposals and backtracking. Stops once the KKT residual
/// is at most `opts.tol`.
///
/// `objective(std::span<const double>) -> double` and
/// `gradient(std::span<const double>) -> std::vector<double>`.
/// `start` (optional) is projected onto the simplex before use; defaults to uniform.
template <class Objective, class Gradient>
Decision minimize_over_simplex(Objective&& objective, Gradient&& gradient, std::size_t K,
                               SolverOptions opts = {}, std::span<const double> start = {}) {
    if (K == 0) throw InvalidDimensionError("minimize_over_simplex: K must be positive");
    if (!(opts.tol > 0.0)) throw DomainError("minimize_over_simplex: tol must be positive");
    if (K == 1) return Decision({1.0});

    std::vector<double> x = start.empty() ? uniform_decision(K).vector() : project_euclidean(start);
    if (x.size() != K) throw InvalidDimensionError("minimize_over_simplex: start has wrong size");

    double fx = objective(std::span<const double>(x));
    std::vector<double> gx = gradient(std::span<const double>(x));
    if (gx.size() != K) throw InvalidDimensionError("minimize_over_simplex: gradient has wrong size");
    if (!std::isfinite(fx) || !detail::all_finite(gx))
        throw NumericalFailureError("minimize_over_simplex: non-finite objective or gradient");

    double step = 1.0 / std::max(1.0, norm_inf(gx));
    double residual = kkt_residual(x, gx, opts.tol);

    std::vector<double> trial(K), d(K);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        if (residual <= opts.tol) return Decision(std::move(x));

        bool accepted = false;
        double fy = 0.0;
        std::vector<double> gy;
        for (int backtrack = 0; backtrack < 200; ++backtrack) {
            for (std::size_t i = 0; i < K; ++i) trial[i] = x[i] - step * gx[i];
            std::vector<double> y = project_euclidean(trial);
            double dd = 0.0, gd = 0.0;
            for (std::size_t i = 0; i < K; ++i) {
                d[i] = y[i] - x[i];
                dd += d[i] * d[i];
                gd += gx[i] * d[i];
            }
            if (dd == 0.0) break;  // step below resolution of x
            fy = objective(std::span<const double>(y));
            gy = gradient(std::span<const double>(y));
            if (std::isfinite(fy) && detail::all_finite(gy)) {
                double curvature = 0.0;
                for (std::size_t i = 0; i < K; ++i) curvature += (gy[i] - gx[i]) * d[i];
                // Armijo on the objective, or a gradient-only descent-lemma test that stays
                // meaningful once objective differences fall below rounding.
                if (fy <= fx + 1e-4 * gd || curvature <= dd / (2.0 * step)) {
                    x = std::move(y);
                    accepted = true;
                    // BB1 proposal for the next step
                    step = curvature > 0.0 ? dd / curvature : step * 4.0;
                    step = std::clamp(step, 1e-20, 1e20);
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!std::isfinite(fx) || !detail::all_finite(gx))
                throw NumericalFailureError("minimize_over_simplex: non-finite objective or gradient");
            throw NonConvergenceError("minimize_over_simplex: line search stalled", x, residual);
        }
        fx = fy;
        gx = std::move(gy);
        residual = kkt_residual(x, gx, opts.tol);
    }
    if (residual <= opts.tol) return Decision(std::move(x));
    throw NonConvergenceError("minimize_over_simplex: iteration cap reached", x, residual);
}

/// argmin over the simplex of 1/2 (p - q)^T B (p - q). Feasible q is returned as is.
inline Decision project_generalized(std::span<const double> q, const PsdMatrix& B,
                                    SolverOptions opts = {}) {
    const std::size_t K = q.size();
    if (K == 0) throw InvalidDimensionError("project_generalized: empty vector");
    if (B.dim() != K) throw InvalidDimensionError("project_generalized: matrix dimension mismatch");

    const bool feasible =
        std::all_of(q.begin(), q.end(), [](double v) { return std::isfinite(v) && v >= 0.0; }) &&
        std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) <= 1e-12;
    if (feasible) return Decision(std::vector<double>(q.begin(), q.end()));

    const std::vector<double> target(q.begin(), q.end());
    std::vector<double> diff(K);
    auto residual_vector = [&](std::span<const double> p) {
        for (std::size_t i = 0; i < K; ++i) diff[i] = p[i] - target[i];
        return B.multiply(diff);
    };
    auto objective = [&](std::span<const double> p) {
        const auto Bd = residual_vector(p);
        return 0.5 * dot(diff, Bd);
    };
    auto gradient = [&](std::span<const double> p) { return residual_vector(p); };
    return minimize_over_simplex(objective, gradient, K, opts, q);
}

}  // namespace fairmix
