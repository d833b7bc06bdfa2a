#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "fairmix/aggregator.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fedsim.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/response.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {

// ---------------------------------------------------------------------------
// Synthetic response sequences

enum class SequenceKind { IID, FixedLeader, Switching, Alternating };

inline std::string_view to_string(SequenceKind k) {
    switch (k) {
        case SequenceKind::IID: return "iid";
        case SequenceKind::FixedLeader: return "fixed-leader";
        case SequenceKind::Switching: return "switching";
        case SequenceKind::Alternating: return "alternating";
    }
    return "?";
}

inline std::optional<SequenceKind> sequence_kind_from_string(std::string_view s) {
    for (auto k : {SequenceKind::IID, SequenceKind::FixedLeader, SequenceKind::Switching, SequenceKind::Alternating})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

inline constexpr SequenceKind kAllSequences[] = {SequenceKind::IID, SequenceKind::FixedLeader,
                                                 SequenceKind::Switching, SequenceKind::Alternating};

/// T response vectors of length K inside `bounds`.
///   iid          every entry uniform on [c1, c2]
///   fixed-leader client 0 uniform on the upper half, the rest on the lower half
///   switching    like fixed-leader, the leader moves to the next client every T/4 rounds
///   alternating  first half of the clients at c2 on even rounds, second half on odd rounds
inline std::vector<std::vector<double>> response_sequence(SequenceKind kind, std::size_t K, std::size_t T,
                                                          const ResponseBounds& bounds, std::uint64_t seed) {
    if (K == 0 || T == 0) throw InvalidDimensionError("response_sequence: K and T must be positive");
    Rng rng = make_rng(seed, Stream::Data, static_cast<std::uint64_t>(kind));
    const double lo = bounds.c1(), hi = bounds.c2(), mid = 0.5 * (lo + hi);
    std::uniform_real_distribution<double> full(lo, hi), upper(mid, hi), lower(lo, mid);
    const std::size_t block = std::max<std::size_t>(1, T / 4);

    std::vector<std::vector<double>> seq(T, std::vector<double>(K));
    for (std::size_t t = 0; t < T; ++t) {
        auto& r = seq[t];
        switch (kind) {
            case SequenceKind::IID:
                for (auto& v : r) v = full(rng);
                break;
            case SequenceKind::FixedLeader:
            case SequenceKind::Switching: {
                const std::size_t leader = kind == SequenceKind::FixedLeader ? 0 : (t / block) % K;
                for (std::size_t i = 0; i < K; ++i) r[i] = i == leader ? upper(rng) : lower(rng);
                break;
            }
            case SequenceKind::Alternating:
                for (std::size_t i = 0; i < K; ++i) r[i] = ((i < (K + 1) / 2) == (t % 2 == 0)) ? hi : lo;
                break;
        }
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Regret diagnostics

/// 2 l_inf K (1 + log(1 + T / (16 K)))
inline double ons_regret_bound(double l_inf, std::size_t K, std::size_t T) {
    const double k = static_cast<double>(K);
    return 2.0 * l_inf * k * (1.0 + std::log(1.0 + static_cast<double>(T) / (16.0 * k)));
}

/// 2 l_inf sqrt(T log K)
inline double ftrl_regret_bound(double l_inf, std::size_t K, std::size_t T) {
    return 2.0 * l_inf * std::sqrt(static_cast<double>(T) * std::log(static_cast<double>(K)));
}

/// Decisions played by an aggregator on a response sequence. Each round a C-fraction of the
/// clients is sampled and only their responses are revealed; losses are scored on the full vector.
inline std::vector<Decision> play_sequence(const AggregatorMethod& method,
                                           const std::vector<std::vector<double>>& responses,
                                           const ResponseBounds& bounds, double C = 1.0, std::uint64_t seed = 0) {
    if (responses.empty()) throw InvalidDimensionError("play_sequence: empty sequence");
    const std::size_t K = responses.front().size();
    Aggregator agg(method, K, bounds, C);
    std::vector<Decision> played;
    played.reserve(responses.size());
    const std::vector<std::size_t> ones(K, 1);
    for (std::size_t t = 0; t < responses.size(); ++t) {
        played.push_back(agg.decision());
        Rng rng = make_rng(seed, Stream::Sampling, t);
        const auto sampled = C < 1.0 ? sample_clients(K, C, rng) : [&] {
            std::vector<std::size_t> all(K);
            for (std::size_t i = 0; i < K; ++i) all[i] = i;
            return all;
        }();
        ResponseVector rv{std::vector<double>(K, 0.0), std::vector<bool>(K, false)};
        std::vector<double> losses;
        for (auto i : sampled) {
            rv.values[i] = responses[t][i];
            rv.observed[i] = true;
            losses.push_back(responses[t][i]);
        }
        std::vector<std::size_t> n(sampled.size(), 1);
        agg.step({sampled, n, losses, rv});
    }
    return played;
}

struct RegretBenchRow {
    MethodKind method;
    SequenceKind sequence;
    std::size_t K;
    std::size_t T;
    double regret;
    double bound;
    bool within() const { return regret <= bound; }
};

/// Full-participation regret of AAggFF-S and AAggFF-D on every sequence kind, against their bounds.
inline std::vector<RegretBenchRow> regret_bench(std::size_t K, const std::vector<std::size_t>& horizons,
                                                const ResponseBounds& bounds, std::uint64_t seed = 0) {
    const double l_inf = lipschitz_constants(bounds, 1.0).l_inf;
    std::vector<RegretBenchRow> rows;
    for (auto T : horizons)
        for (auto kind : kAllSequences) {
            const auto seq = response_sequence(kind, K, T, bounds, seed);
            for (auto m : {AggregatorMethod::aaggff_s(), AggregatorMethod::aaggff_d()}) {
                const auto played = play_sequence(m, seq, bounds);
                const double regret = cumulative_regret(played, seq).regret;
                const double bound = m.kind == MethodKind::AAggFFS ? ons_regret_bound(l_inf, K, T)
                                                                   : ftrl_regret_bound(l_inf, K, T);
                rows.push_back({m.kind, kind, K, T, regret, bound});
            }
        }
    return rows;
}

// ---------------------------------------------------------------------------
// Unification check

struct UnifyCheckRow {
    AggregatorMethod method;
    std::size_t instances;
    double max_error;  ///< largest infinity-norm gap between closed form and EG form
};

/// Random instances per baseline: closed-form coefficients vs one EG step of the unified form.
inline UnifyCheckRow unify_check(const AggregatorMethod& method, std::size_t instances, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::Data, static_cast<std::uint64_t>(method.kind));
    std::uniform_int_distribution<std::size_t> K_dist(2, 20), n_dist(1, 500);
    std::uniform_real_distribution<double> F_dist(0.05, method.kind == MethodKind::PropFair ? method.prop_m * 0.9 : 3.0);
    double worst = 0.0;
    for (std::size_t it = 0; it < instances; ++it) {
        const std::size_t K = K_dist(rng);
        std::vector<std::size_t> n(K);
        std::vector<double> F(K);
        for (auto& v : n) v = n_dist(rng);
        for (auto& v : F) v = F_dist(rng);
        const Decision closed = baseline_coefficients(method, n, F);
        const auto form = unified_form(method, n, F);
        const Decision eg = eg_unified_step(form.last_decision, form.response, form.step);
        for (std::size_t i = 0; i < K; ++i) worst = std::max(worst, std::abs(closed[i] - eg[i]));
    }
    return {method, instances, worst};
}

/// The baseline grid: Static, AFL and every q, lambda, M in the standard search lists.
inline std::vector<AggregatorMethod> baseline_grid() {
    std::vector<AggregatorMethod> out{AggregatorMethod::make_static(), AggregatorMethod::afl()};
    for (double q : {0.1, 1.0, 5.0}) out.push_back(AggregatorMethod::qfedavg(q));
    for (double l : {0.1, 1.0, 10.0}) out.push_back(AggregatorMethod::term(l));
    for (double m : {2.0, 3.0, 5.0}) out.push_back(AggregatorMethod::propfair(m));
    return out;
}

}  // namespace fairmix
