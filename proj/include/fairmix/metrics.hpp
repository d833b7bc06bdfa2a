#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fairmix/decision.hpp"
#include "fairmix/error.hpp"
#include "fairmix/simplex.hpp"

namespace fairmix {

/// Spread of a client performance distribution.
struct PerformanceSummary {
    double average = 0.0;
    double worst10 = 0.0;   ///< mean of the bottom ceil(K/10) values
    double best10 = 0.0;    ///< mean of the top ceil(K/10) values
    double gini_x100 = 0.0;
    double acc_parity_gap = 0.0;  ///< max - min
};

inline PerformanceSummary performance_summary(std::span<const double> values) {
    if (values.empty()) throw InvalidDimensionError("performance_summary: no values");
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("performance_summary: values must be nonnegative");

    const std::size_t K = values.size();
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    PerformanceSummary s;
    double total = 0.0;
    for (double v : sorted) total += v;
    s.average = total / static_cast<double>(K);

    const std::size_t tail = (K + 9) / 10;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < tail; ++i) {
        lo += sorted[i];
        hi += sorted[K - 1 - i];
    }
    s.worst10 = lo / static_cast<double>(tail);
    s.best10 = hi / static_cast<double>(tail);
    s.acc_parity_gap = sorted.back() - sorted.front();

    if (s.average > 0.0) {
        // sum_i sum_j |v_i - v_j| = 2 sum_i (2i - K + 1) v_(i) for ascending order
        double pair_sum = 0.0;
        for (std::size_t i = 0; i < K; ++i)
            pair_sum += (2.0 * static_cast<double>(i) - static_cast<double>(K) + 1.0) * sorted[i];
        pair_sum *= 2.0;
        s.gini_x100 = 100.0 * pair_sum / (2.0 * static_cast<double>(K * K) * s.average);
    }
    return s;
}

struct RegretResult {
    double regret;
    Decision hindsight;
};

/// sum of total decision losses of `decisions` minus that of the best fixed decision.
inline RegretResult cumulative_regret(std::span<const Decision> decisions,
                                      std::span<const std::vector<double>> responses,
                                      SolverOptions opts = {}) {
    if (decisions.empty()) throw InvalidDimensionError("cumulative_regret: empty sequence");
    if (decisions.size() != responses.size())
        throw InvalidDimensionError("cumulative_regret: sequences differ in length");
    const std::size_t K = decisions.front().size();
    for (const auto& r : responses)
        if (r.size() != K) throw InvalidDimensionError("cumulative_regret: response dimension mismatch");

    double suffered = 0.0;
    for (std::size_t t = 0; t < decisions.size(); ++t) suffered += decision_loss(decisions[t], responses[t]);

    auto objective = [&](std::span<const double> p) {
        double f = 0.0;
        for (const auto& r : responses) f -= std::log1p(dot(p, r));
        return f;
    };
    auto gradient = [&](std::span<const double> p) {
        std::vector<double> g(K, 0.0);
        for (const auto& r : responses) {
            const double growth = 1.0 + dot(p, r);
            for (std::size_t i = 0; i < K; ++i) g[i] -= r[i] / growth;
        }
        return g;
    };
    Decision best = minimize_over_simplex(objective, gradient, K, opts);
    const double best_loss = objective(best.weights());
    return {suffered - best_loss, std::move(best)};
}

}  // namespace fairmix
