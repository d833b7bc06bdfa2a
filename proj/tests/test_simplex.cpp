#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fairmix/simplex.hpp"
#include "oracles.hpp"

using namespace fairmix;

TEST(Decision, RejectsInvalidWeights) {
    EXPECT_THROW(Decision({}), InvalidDimensionError);
    EXPECT_THROW(Decision({0.5, 0.6}), DomainError);
    EXPECT_THROW(Decision({1.2, -0.2}), DomainError);
    EXPECT_THROW(Decision({std::nan(""), 1.0}), DomainError);
    EXPECT_NO_THROW(Decision({0.25, 0.75}));
}

TEST(UniformDecision, Examples) {
    EXPECT_EQ(uniform_decision(4).vector(), (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
    EXPECT_EQ(uniform_decision(1).vector(), std::vector<double>{1.0});
    const auto p7 = uniform_decision(7);
    double s = 0.0;
    for (double v : p7) {
        EXPECT_DOUBLE_EQ(v, 1.0 / 7.0);
        s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_THROW(uniform_decision(0), InvalidDimensionError);
}

TEST(PsdMatrix, RejectsAsymmetricOrIndefinite) {
    EXPECT_THROW(PsdMatrix::from_entries(2, {1.0, 0.5, 0.4, 1.0}), DomainError);
    EXPECT_THROW(PsdMatrix::from_entries(2, {1.0, 2.0, 2.0, 1.0}), DomainError);
    EXPECT_THROW(PsdMatrix::scaled_identity(3, 0.0), DomainError);
    auto B = PsdMatrix::scaled_identity(2, 2.0);
    B.add_outer(1.0, std::vector<double>{1.0, 1.0});
    const auto inv = B.inverse();
    // [[3,1],[1,3]]^-1 = [[3,-1],[-1,3]] / 8
    EXPECT_NEAR(inv[0], 3.0 / 8.0, 1e-15);
    EXPECT_NEAR(inv[1], -1.0 / 8.0, 1e-15);
}

TEST(ProjectEuclidean, MatchesGridOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> q{u(rng), u(rng), u(rng)};
        const auto p = project_euclidean(q);
        const auto ref = oracle::grid_argmin3([&](std::span<const double> x) {
            double s = 0.0;
            for (int i = 0; i < 3; ++i) s += (x[i] - q[i]) * (x[i] - q[i]);
            return s;
        });
        EXPECT_LE(oracle::max_abs_diff(p, ref), 2e-3);
    }
}

TEST(MinimizeOverSimplex, SymmetricQuadratic) {
    auto f = [](std::span<const double> p) { return 0.5 * dot(p, p); };
    auto g = [](std::span<const double> p) { return std::vector<double>(p.begin(), p.end()); };
    const auto p = minimize_over_simplex(f, g, 3);
    for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-9);
}

TEST(MinimizeOverSimplex, LinearPicksMinimumCoordinate) {
    const std::vector<double> c{1.0, 0.0, 2.0};
    auto f = [&](std::span<const double> p) { return dot(c, p); };
    auto g = [&](std::span<const double>) { return c; };
    const auto p = minimize_over_simplex(f, g, 3);
    EXPECT_NEAR(p[1], 1.0, 1e-12);
}

TEST(MinimizeOverSimplex, LogGrowthMatchesGridOracle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> log(10, std::vector<double>(3));
    for (auto& r : log)
        for (auto& v : r) v = u(rng);
    auto f = [&](std::span<const double> p) {
        double s = 0.0;
        for (const auto& r : log) s -= std::log(1.0 + dot(p, r));
        return s;
    };
    auto g = [&](std::span<const double> p) {
        std::vector<double> out(3, 0.0);
        for (const auto& r : log) {
            const double d = 1.0 + dot(p, r);
            for (int i = 0; i < 3; ++i) out[i] -= r[i] / d;
        }
        return out;
    };
    const auto p = minimize_over_simplex(f, g, 3);
    const auto ref = oracle::grid_argmin3(f);
    EXPECT_LE(oracle::max_abs_diff(p.weights(), ref), 2e-3);
    EXPECT_LE(kkt_residual(p.weights(), g(p.weights()), 1e-9), 1e-9);
    EXPECT_LE(f(p.weights()), f(uniform_decision(3).weights()) + 1e-9);
}

TEST(MinimizeOverSimplex, NonFiniteIsNumericalFailure) {
    auto f = [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); };
    auto g = [](std::span<const double> p) { return std::vector<double>(p.size(), 0.0); };
    EXPECT_THROW(minimize_over_simplex(f, g, 3), NumericalFailureError);
}

TEST(MinimizeOverSimplex, IterationCapCarriesBestIterate) {
    // ill-conditioned quadratic with an interior minimizer
    const std::vector<double> w{1.0, 1e6, 3.0, 7.0};
    auto f = [&](std::span<const double> p) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += 0.5 * w[i] * (p[i] - 0.1) * (p[i] - 0.1);
        return s;
    };
    auto g = [&](std::span<const double> p) {
        std::vector<double> out(4);
        for (int i = 0; i < 4; ++i) out[i] = w[i] * (p[i] - 0.1);
        return out;
    };
    try {
        (void)minimize_over_simplex(f, g, 4, {1e-14, 1});
        FAIL() << "expected non-convergence";
    } catch (const NonConvergenceError& e) {
        EXPECT_EQ(e.best().size(), 4u);
        EXPECT_GT(e.residual(), 1e-14);
        EXPECT_NO_THROW(Decision(e.best()));
    }
}

TEST(ProjectGeneralized, FeasiblePointUnchanged) {
    const auto q = uniform_decision(3);
    const auto p = project_generalized(q.weights(), PsdMatrix::scaled_identity(3, 1.0));
    EXPECT_EQ(p.vector(), q.vector());
}

TEST(ProjectGeneralized, ExteriorPointIdentityMetric) {
    const auto p = project_generalized(std::vector<double>{2.0, -1.0}, PsdMatrix::scaled_identity(2, 1.0));
    EXPECT_NEAR(p[0], 1.0, 1e-12);
    EXPECT_NEAR(p[1], 0.0, 1e-12);
}

TEST(ProjectGeneralized, MatchesGridOracleAndIsIdempotent) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 2.0), a(0.5, 2.0);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> q{u(rng), u(rng), u(rng)};
        auto B = PsdMatrix::scaled_identity(3, a(rng));
        B.add_outer(a(rng), std::vector<double>{u(rng), u(rng), u(rng)});
        const auto p = project_generalized(q, B);
        const auto ref = oracle::grid_argmin3([&](std::span<const double> x) {
            std::vector<double> d{x[0] - q[0], x[1] - q[1], x[2] - q[2]};
            return dot(d, B.multiply(d));
        });
        EXPECT_LE(oracle::max_abs_diff(p.weights(), ref), 2e-3) << "rep " << rep;
        const auto again = project_generalized(p.weights(), B);
        EXPECT_LE(oracle::max_abs_diff(p.weights(), again.weights()), 1e-9);
    }
}
