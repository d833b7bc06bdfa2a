#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fairmix/response.hpp"

using namespace fairmix;

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

TEST(CdfKind, Defaults) {
    EXPECT_EQ(CdfKind::with_defaults(CdfFamily::Weibull).shape, 2.0);
    for (auto f : {CdfFamily::Frechet, CdfFamily::Gumbel, CdfFamily::Logistic, CdfFamily::Normal}) {
        EXPECT_EQ(CdfKind::with_defaults(f).shape, 1.0);
        EXPECT_EQ(CdfKind::with_defaults(f).scale, 1.0);
    }
    EXPECT_THROW((CdfKind{CdfFamily::Normal, 0.0, 1.0}.validate()), DomainError);
}

TEST(CdfEval, DirectSubstitution) {
    EXPECT_NEAR(cdf_eval(CdfKind::with_defaults(CdfFamily::Exponential), 1.0), 1.0 - std::exp(-1.0), 1e-15);
    EXPECT_NEAR(cdf_eval(CdfKind::with_defaults(CdfFamily::Logistic), 1.0), 0.5, 1e-15);
    EXPECT_NEAR(cdf_eval(CdfKind::with_defaults(CdfFamily::Weibull), 2.31), 0.9952, 1e-4);
    EXPECT_NEAR(cdf_eval(CdfKind::with_defaults(CdfFamily::Normal), 1.0), 0.5, 1e-15);
    EXPECT_EQ(cdf_eval(CdfKind::with_defaults(CdfFamily::Frechet), 0.0), 0.0);
    EXPECT_THROW(cdf_eval(CdfKind::with_defaults(CdfFamily::Normal), -0.1), DomainError);
}

TEST(TransformLosses, CatalogAtTwoDecimals) {
    const std::vector<double> losses{0.01, 0.10, 0.02};
    const ResponseBounds unit(0.0, 1.0);
    struct Row {
        CdfFamily family;
        std::vector<double> expect;
    };
    const Row rows[] = {
        {CdfFamily::Weibull, {0.05, 1.00, 0.19}},     {CdfFamily::Frechet, {0.01, 0.65, 0.11}},
        {CdfFamily::Gumbel, {0.12, 0.76, 0.18}},      {CdfFamily::Exponential, {0.21, 0.90, 0.37}},
        {CdfFamily::Logistic, {0.32, 0.79, 0.37}},    {CdfFamily::Normal, {0.22, 0.90, 0.30}},
    };
    for (const auto& row : rows) {
        const auto r = transform_losses(losses, CdfKind::with_defaults(row.family), unit);
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_DOUBLE_EQ(round2(r[i]), row.expect[i]) << to_string(row.family) << " entry " << i;
    }
}

// Phi(0.02 / mean - 1) = 0.295129 rounds to 0.30, one hundredth above the reference value
// the acceptance run checks; that row is reported there as a mismatch.
TEST(TransformLosses, NormalThirdEntryExactValue) {
    const auto r = transform_losses(std::vector<double>{0.01, 0.10, 0.02}, CdfKind::with_defaults(CdfFamily::Normal),
                                    {0.0, 1.0});
    EXPECT_NEAR(r[0], 0.220878, 1e-6);
    EXPECT_NEAR(r[1], 0.904511, 1e-6);
    EXPECT_NEAR(r[2], 0.295129, 1e-6);
}

TEST(TransformLosses, EqualLossesGiveCdfAtOne) {
    for (auto f : {CdfFamily::Weibull, CdfFamily::Gumbel, CdfFamily::Normal}) {
        const auto kind = CdfKind::with_defaults(f);
        const auto r = transform_losses(std::vector<double>{0.4, 0.4, 0.4}, kind, {0.0, 1.0});
        for (double v : r) EXPECT_DOUBLE_EQ(v, cdf_eval(kind, 1.0));
    }
}

TEST(TransformLosses, StaysInsideBounds) {
    const ResponseBounds b(0.1, 0.3);
    const auto r = transform_losses(std::vector<double>{0.0, 5.0, 1e-9, 100.0},
                                    CdfKind::with_defaults(CdfFamily::Exponential), b);
    for (double v : r) EXPECT_TRUE(b.contains(v));
}

TEST(TransformLosses, Errors) {
    const auto kind = CdfKind::with_defaults(CdfFamily::Normal);
    EXPECT_THROW(transform_losses(std::vector<double>{}, kind, {0.0, 1.0}), InvalidDimensionError);
    EXPECT_THROW(transform_losses(std::vector<double>{0.0, 0.0}, kind, {0.0, 1.0}), DegenerateInputError);
    EXPECT_THROW(transform_losses(std::vector<double>{-1.0, 2.0}, kind, {0.0, 1.0}), DomainError);
}

TEST(ResponseBounds, Defaults) {
    EXPECT_DOUBLE_EQ(ResponseBounds::cross_silo(10).c2(), 0.1);
    EXPECT_DOUBLE_EQ(ResponseBounds::cross_device(0.01).c2(), 0.01);
    EXPECT_THROW(ResponseBounds(0.2, 0.2), DomainError);
    EXPECT_THROW(ResponseBounds(-0.1, 0.2), DomainError);
}
