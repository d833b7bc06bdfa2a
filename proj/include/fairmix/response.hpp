#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairmix/error.hpp"

namespace fairmix {

enum class CdfFamily { Weibull, Frechet, Gumbel, Exponential, Logistic, Normal };

inline std::string_view to_string(CdfFamily f) {
    switch (f) {
        case CdfFamily::Weibull: return "Weibull";
        case CdfFamily::Frechet: return "Frechet";
        case CdfFamily::Gumbel: return "Gumbel";
        case CdfFamily::Exponential: return "Exponential";
        case CdfFamily::Logistic: return "Logistic";
        case CdfFamily::Normal: return "Normal";
    }
    return "?";
}

inline std::optional<CdfFamily> cdf_family_from_string(std::string_view s) {
    for (auto f : {CdfFamily::Weibull, CdfFamily::Frechet, CdfFamily::Gumbel,
                   CdfFamily::Exponential, CdfFamily::Logistic, CdfFamily::Normal})
        if (to_string(f) == s) return f;
    return std::nullopt;
}

/// A CDF used to squash centered losses into [0, 1].
///
/// `scale` is the first parameter of each family (the location for Gumbel, Logistic and
/// Normal, the rate for Exponential); `shape` is the second. Exponential ignores `shape`.
struct CdfKind {
    CdfFamily family = CdfFamily::Normal;
    double scale = 1.0;
    double shape = 1.0;

    /// Family with its default parameters: scale 1, shape 2 for Weibull and 1 otherwise.
    static CdfKind with_defaults(CdfFamily family) {
        return {family, 1.0, family == CdfFamily::Weibull ? 2.0 : 1.0};
    }

    void validate() const {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("CDF scale must be positive");
        if (family != CdfFamily::Exponential && (!(shape > 0.0) || !std::isfinite(shape)))
            throw DomainError("CDF shape must be positive");
    }

    friend bool operator==(const CdfKind&, const CdfKind&) = default;
};

/// Closed response range [c1, c2] with 0 <= c1 < c2.
class ResponseBounds {
 public:
    ResponseBounds(double c1, double c2) : c1_(c1), c2_(c2) {
        if (!std::isfinite(c1) || !std::isfinite(c2) || c1 < 0.0 || !(c1 < c2))
            throw DomainError("response bounds must satisfy 0 <= c1 < c2");
    }

    /// [0, 1/K]
    static ResponseBounds cross_silo(std::size_t K) {
        if (K == 0) throw InvalidDimensionError("cross_silo bounds: K must be positive");
        return {0.0, 1.0 / static_cast<double>(K)};
    }

    /// [0, C]
    static ResponseBounds cross_device(double C) { return {0.0, C}; }

    double c1() const noexcept { return c1_; }
    double c2() const noexcept { return c2_; }
    double width() const noexcept { return c2_ - c1_; }
    bool contains(double r) const noexcept { return r >= c1_ && r <= c2_; }

    friend bool operator==(const ResponseBounds&, const ResponseBounds&) = default;

 private:
    double c1_;
    double c2_;
};

/// Per-client responses for one round. Unobserved entries carry no information.
struct ResponseVector {
    std::vector<double> values;
    std::vector<bool> observed;

    std::size_t size() const noexcept { return values.size(); }
    std::size_t observed_count() const {
        return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), true));
    }
    /// Mean over observed entries; throws DegenerateInputError when none are observed.
    double observed_mean() const {
        double s = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (observed[i]) {
                s += values[i];
                ++m;
            }
        if (m == 0) throw DegenerateInputError("response vector has no observed entries");
        return s / static_cast<double>(m);
    }
};

inline double cdf_eval(const CdfKind& kind, double x) {
    if (!(x >= 0.0)) throw DomainError("cdf_eval: input must be nonnegative");
    kind.validate();
    const double a = kind.scale;
    const double b = kind.shape;
    switch (kind.family) {
        case CdfFamily::Weibull: return 1.0 - std::exp(-std::pow(x / a, b));
        case CdfFamily::Frechet:
            if (x == 0.0) return 0.0;
            return std::exp(-std::pow(x / a, -b));
        case CdfFamily::Gumbel: return std::exp(-std::exp(-(x - a) / b));
        case CdfFamily::Exponential: return 1.0 - std::exp(-a * x);
        case CdfFamily::Logistic: return 1.0 / (1.0 + std::exp(-(x - a) / b));
        case CdfFamily::Normal: return 0.5 * (1.0 + std::erf((x - a) / (b * std::sqrt(2.0))));
    }
    throw InvariantError("cdf_eval: unknown family");
}

/// Maps the losses of the available clients to [c1, c2] through CDF(loss / mean loss).
inline std::vector<double> transform_losses(std::span<const double> losses, const CdfKind& kind,
                                            const ResponseBounds& bounds) {
    if (losses.empty()) throw InvalidDimensionError("transform_losses: no losses");
    double mean = 0.0;
    for (double f : losses) {
        if (!(f >= 0.0) || !std::isfinite(f))
            throw DomainError("transform_losses: losses must be finite and nonnegative");
        mean += f;
    }
    mean /= static_cast<double>(losses.size());
    if (!(mean > 0.0)) throw DegenerateInputError("transform_losses: all losses are zero");

    std::vector<double> out(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const double r = bounds.c1() + bounds.width() * cdf_eval(kind, losses[i] / mean);
        out[i] = std::clamp(r, bounds.c1(), bounds.c2());
    }
    return out;
}

}  // namespace fairmix
