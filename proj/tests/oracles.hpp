#pragma once

// Independent reference computations used by the unit tests: brute-force grids,
// finite differences and exhaustive enumeration. Nothing here calls the solver.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace oracle {

/// Minimizer of f over the K=3 simplex on a grid of the given spacing.
inline std::vector<double> grid_argmin3(const std::function<double(std::span<const double>)>& f,
                                        double spacing = 1e-3) {
    const int n = static_cast<int>(std::lround(1.0 / spacing));
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> arg(3), p(3);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            p[0] = i * spacing;
            p[1] = j * spacing;
            p[2] = 1.0 - p[0] - p[1];
            if (p[2] < 0.0) p[2] = 0.0;
            const double v = f(p);
            if (v < best) {
                best = v;
                arg = p;
            }
        }
    return arg;
}

/// Minimizer of f over the K=2 simplex, parametrized by p0 on a grid.
inline std::vector<double> grid_argmin2(const std::function<double(std::span<const double>)>& f,
                                        double spacing = 1e-4) {
    const int n = static_cast<int>(std::lround(1.0 / spacing));
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> arg(2), p(2);
    for (int i = 0; i <= n; ++i) {
        p[0] = i * spacing;
        p[1] = 1.0 - p[0];
        const double v = f(p);
        if (v < best) {
            best = v;
            arg = p;
        }
    }
    return arg;
}

/// Central-difference gradient.
inline std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double up = f(x);
        x[i] = xi - h;
        const double down = f(x);
        x[i] = xi;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// All size-m subsets of {0..K-1} in lexicographic order.
inline std::vector<std::vector<std::size_t>> subsets(std::size_t K, std::size_t m) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (cur.size() == m) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < K; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
