#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fairmix/error.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {

/// Dense labelled samples; features are row-major (size() x dim).
struct Dataset {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> features;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }

    Dataset subset(std::span<const std::size_t> rows) const {
        Dataset out{dim, num_classes, {}, {}};
        out.features.reserve(rows.size() * dim);
        out.labels.reserve(rows.size());
        for (auto r : rows) {
            auto x = row(r);
            out.features.insert(out.features.end(), x.begin(), x.end());
            out.labels.push_back(labels[r]);
        }
        return out;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { LogisticRegression, MLP };

inline std::string_view to_string(ModelKind k) {
    return k == ModelKind::LogisticRegression ? "LogisticRegression" : "MLP";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
    if (s == "LogisticRegression") return ModelKind::LogisticRegression;
    if (s == "MLP") return ModelKind::MLP;
    return std::nullopt;
}

/// Multinomial logistic regression, or a one-hidden-layer tanh network, both with biases.
struct ModelSpec {
    ModelKind kind = ModelKind::LogisticRegression;
    std::size_t input_dim = 2;
    std::size_t num_classes = 2;
    std::size_t hidden = 16;  ///< MLP only

    void validate() const {
        if (input_dim == 0) throw DomainError("model: input_dim must be positive");
        if (num_classes < 2) throw DomainError("model: num_classes must be at least 2");
        if (kind == ModelKind::MLP && hidden == 0) throw DomainError("model: hidden must be positive");
    }

    std::size_t num_params() const {
        if (kind == ModelKind::LogisticRegression) return num_classes * (input_dim + 1);
        return hidden * (input_dim + 1) + num_classes * (hidden + 1);
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Zero for logistic regression; scaled Gaussian weights and zero biases for the MLP.
inline std::vector<double> init_params(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<double> params(spec.num_params(), 0.0);
    if (spec.kind == ModelKind::MLP) {
        const std::size_t d = spec.input_dim, h = spec.hidden, L = spec.num_classes;
        std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
        std::normal_distribution<double> n2(0.0, 1.0 / std::sqrt(static_cast<double>(h)));
        for (std::size_t i = 0; i < h * d; ++i) params[i] = n1(rng);
        const std::size_t w2 = h * d + h;
        for (std::size_t i = 0; i < L * h; ++i) params[w2 + i] = n2(rng);
    }
    return params;
}

namespace detail {

struct Forward {
    std::vector<double> hidden;  ///< MLP activations (empty for logistic)
    std::vector<double> logits;
};

inline Forward forward(const ModelSpec& spec, std::span<const double> params, std::span<const double> x) {
    const std::size_t d = spec.input_dim, L = spec.num_classes;
    Forward f;
    f.logits.assign(L, 0.0);
    if (spec.kind == ModelKind::LogisticRegression) {
        const double* W = params.data();
        const double* b = W + L * d;
        for (std::size_t c = 0; c < L; ++c) {
            double z = b[c];
            for (std::size_t j = 0; j < d; ++j) z += W[c * d + j] * x[j];
            f.logits[c] = z;
        }
        return f;
    }
    const std::size_t h = spec.hidden;
    const double* W1 = params.data();
    const double* b1 = W1 + h * d;
    const double* W2 = b1 + h;
    const double* b2 = W2 + L * h;
    f.hidden.assign(h, 0.0);
    for (std::size_t k = 0; k < h; ++k) {
        double z = b1[k];
        for (std::size_t j = 0; j < d; ++j) z += W1[k * d + j] * x[j];
        f.hidden[k] = std::tanh(z);
    }
    for (std::size_t c = 0; c < L; ++c) {
        double z = b2[c];
        for (std::size_t k = 0; k < h; ++k) z += W2[c * h + k] * f.hidden[k];
        f.logits[c] = z;
    }
    return f;
}

/// In-place softmax; returns log-sum-exp.
inline double softmax(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        s += v;
    }
    for (double& v : z) v /= s;
    return mx + std::log(s);
}

}  // namespace detail

struct LossAndGrad {
    double loss;
    std::vector<double> grad;
};

/// Mean cross-entropy over `rows` of `data` and its exact gradient.
inline LossAndGrad loss_and_grad(const ModelSpec& spec, std::span<const double> params,
                                 const Dataset& data, std::span<const std::size_t> rows) {
    if (params.size() != spec.num_params()) throw InvalidDimensionError("loss_and_grad: wrong parameter count");
    if (data.dim != spec.input_dim) throw InvalidDimensionError("loss_and_grad: feature dimension mismatch");
    if (rows.empty()) throw DegenerateInputError("loss_and_grad: empty batch");
    if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); }))
        throw NumericalFailureError("loss_and_grad: non-finite parameters");

    const std::size_t d = spec.input_dim, L = spec.num_classes;
    LossAndGrad out{0.0, std::vector<double>(params.size(), 0.0)};
    const double inv_n = 1.0 / static_cast<double>(rows.size());

    for (auto r : rows) {
        const auto x = data.row(r);
        const int y = data.labels[r];
        auto f = detail::forward(spec, params, x);
        const double y_logit = f.logits[y];
        const double lse = detail::softmax(f.logits);
        out.loss += (lse - y_logit) * inv_n;
        // dlogits = softmax - onehot
        std::vector<double>& dz = f.logits;
        dz[y] -= 1.0;

        if (spec.kind == ModelKind::LogisticRegression) {
            double* gW = out.grad.data();
            double* gb = gW + L * d;
            for (std::size_t c = 0; c < L; ++c) {
                const double s = dz[c] * inv_n;
                for (std::size_t j = 0; j < d; ++j) gW[c * d + j] += s * x[j];
                gb[c] += s;
            }
            continue;
        }
        const std::size_t h = spec.hidden;
        const double* W2 = params.data() + h * d + h;
        double* gW1 = out.grad.data();
        double* gb1 = gW1 + h * d;
        double* gW2 = gb1 + h;
        double* gb2 = gW2 + L * h;
        for (std::size_t c = 0; c < L; ++c) {
            const double s = dz[c] * inv_n;
            for (std::size_t k = 0; k < h; ++k) gW2[c * h + k] += s * f.hidden[k];
            gb2[c] += s;
        }
        for (std::size_t k = 0; k < h; ++k) {
            double back = 0.0;
            for (std::size_t c = 0; c < L; ++c) back += dz[c] * W2[c * h + k];
            const double s = back * (1.0 - f.hidden[k] * f.hidden[k]) * inv_n;
            for (std::size_t j = 0; j < d; ++j) gW1[k * d + j] += s * x[j];
            gb1[k] += s;
        }
    }
    return out;
}

inline LossAndGrad loss_and_grad(const ModelSpec& spec, std::span<const double> params, const Dataset& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return loss_and_grad(spec, params, data, rows);
}

/// Mean cross-entropy without the gradient.
inline double mean_loss(const ModelSpec& spec, std::span<const double> params, const Dataset& data) {
    if (data.size() == 0) throw DegenerateInputError("mean_loss: empty dataset");
    double loss = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        auto f = detail::forward(spec, params, data.row(r));
        const double y_logit = f.logits[data.labels[r]];
        const double mx = *std::max_element(f.logits.begin(), f.logits.end());
        double s = 0.0;
        for (double z : f.logits) s += std::exp(z - mx);
        loss += mx + std::log(s) - y_logit;
    }
    return loss / static_cast<double>(data.size());
}

inline double accuracy(const ModelSpec& spec, std::span<const double> params, const Dataset& data) {
    if (data.size() == 0) throw DegenerateInputError("accuracy: empty dataset");
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        auto f = detail::forward(spec, params, data.row(r));
        const auto pred = std::max_element(f.logits.begin(), f.logits.end()) - f.logits.begin();
        if (pred == data.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticOptions {
    /// Distance scale of the class means from the origin.
    double separation = 3.0;
    /// Noise standard deviation of the last class relative to the first; intermediate classes
    /// interpolate linearly. Values above 1 make some classes harder than others.
    double spread_ratio = 2.0;
};

/// Gaussian class clusters. Class means sit on the scaled simplex vertices separation * e_c
/// (on a circle when there are more classes than dimensions); labels are balanced within one.
inline Dataset make_synthetic(std::size_t n, std::size_t dim, std::size_t num_classes, std::uint64_t seed,
                              SyntheticOptions opts = {}) {
    if (num_classes < 2) throw DomainError("make_synthetic: need at least two classes");
    if (dim == 0) throw DomainError("make_synthetic: dim must be positive");
    if (n < num_classes) throw DomainError("make_synthetic: n must be at least num_classes");

    Rng rng = make_rng(seed, Stream::Data);
    std::vector<double> means(num_classes * dim, 0.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (num_classes <= dim) {
            means[c * dim + c] = opts.separation;
        } else if (dim >= 2) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
            means[c * dim + 0] = opts.separation * std::cos(angle);
            means[c * dim + 1] = opts.separation * std::sin(angle);
        } else {
            means[c] = opts.separation * static_cast<double>(c);
        }
    }

    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % num_classes);
    std::shuffle(labels.begin(), labels.end(), rng);

    Dataset data{dim, num_classes, std::vector<double>(n * dim), std::move(labels)};
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(data.labels[i]);
        const double sigma =
            1.0 + (opts.spread_ratio - 1.0) * static_cast<double>(c) / static_cast<double>(num_classes - 1);
        for (std::size_t j = 0; j < dim; ++j) data.features[i * dim + j] = means[c * dim + j] + sigma * noise(rng);
    }
    return data;
}

/// Reads a CSV with a header row; the last column is an integer class label.
inline Dataset load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("csv: missing header row");
    std::size_t columns = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (columns < 2) throw ParseError("csv: need at least one feature column and a label column");

    Dataset data{columns - 1, 0, {}, {}};
    int max_label = -1;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            if (col > columns) break;
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
            if (used != cell.size() || cell.empty() || !std::isfinite(v))
                throw ParseError("csv: non-numeric cell '" + cell + "' in row " + std::to_string(row) +
                                     ", column " + std::to_string(col),
                                 static_cast<int>(row - 1), static_cast<int>(col - 1));
            if (col == columns) {
                if (v < 0.0 || v != std::floor(v))
                    throw ParseError("csv: label must be a nonnegative integer in row " + std::to_string(row),
                                     static_cast<int>(row - 1), static_cast<int>(col - 1));
                data.labels.push_back(static_cast<int>(v));
                max_label = std::max(max_label, static_cast<int>(v));
            } else {
                data.features.push_back(v);
            }
        }
        if (col != columns)
            throw ParseError("csv: row " + std::to_string(row) + " has " + std::to_string(col) +
                                 " cells, expected " + std::to_string(columns),
                             static_cast<int>(row - 1), 0);
    }
    if (data.labels.empty()) throw ParseError("csv: no data rows");
    data.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label + 1));
    return data;
}

inline Dataset load_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    return load_csv(in);
}

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionScheme { Dirichlet, Pathological, IID };

inline std::string_view to_string(PartitionScheme s) {
    switch (s) {
        case PartitionScheme::Dirichlet: return "Dirichlet";
        case PartitionScheme::Pathological: return "Pathological";
        case PartitionScheme::IID: return "IID";
    }
    return "?";
}

inline std::optional<PartitionScheme> partition_scheme_from_string(std::string_view s) {
    for (auto p : {PartitionScheme::Dirichlet, PartitionScheme::Pathological, PartitionScheme::IID})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::Dirichlet;
    double alpha = 0.01;                 ///< Dirichlet concentration
    std::size_t classes_per_client = 2;  ///< Pathological
    std::size_t K = 10;
    std::uint64_t seed = 0;

    friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

namespace detail {

/// Near-equal sizes summing to n (first n % K shards get one extra).
inline std::vector<std::size_t> even_sizes(std::size_t n, std::size_t K) {
    std::vector<std::size_t> sizes(K, n / K);
    for (std::size_t k = 0; k < n % K; ++k) ++sizes[k];
    return sizes;
}

/// Moves one sample from the largest shard into each empty shard.
inline void ensure_nonempty(std::vector<std::vector<std::size_t>>& shards) {
    for (auto& shard : shards) {
        if (!shard.empty()) continue;
        auto largest = std::max_element(shards.begin(), shards.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        if (largest->size() < 2) throw DomainError("partition: not enough samples for every client");
        shard.push_back(largest->back());
        largest->pop_back();
    }
}

}  // namespace detail

/// Splits sample indices into K disjoint, exhaustive, nonempty shards.
///
/// Dirichlet: every client has an equal share of samples and draws its class mix from
/// Dir(alpha * 1_L); when a class runs out, the shortfall comes from the classes with the
/// most samples left. Pathological: client k holds classes k*m, ..., k*m + m - 1 (mod L), and
/// each class is split evenly among its holders. IID: shuffled equal split.
inline std::vector<std::vector<std::size_t>> partition_indices(std::span<const int> labels,
                                                               std::size_t num_classes,
                                                               const PartitionSpec& spec) {
    const std::size_t n = labels.size(), K = spec.K;
    if (K == 0) throw DomainError("partition: K must be positive");
    if (K > n) throw DomainError("partition: more clients than samples");
    Rng rng = make_rng(spec.seed, Stream::Partition);
    std::vector<std::vector<std::size_t>> shards(K);

    std::vector<std::vector<std::size_t>> pools(num_classes);
    for (std::size_t i = 0; i < n; ++i) pools.at(static_cast<std::size_t>(labels[i])).push_back(i);
    for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), rng);

    switch (spec.scheme) {
        case PartitionScheme::IID: {
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), std::size_t{0});
            std::shuffle(all.begin(), all.end(), rng);
            const auto sizes = detail::even_sizes(n, K);
            std::size_t pos = 0;
            for (std::size_t k = 0; k < K; ++k) {
                shards[k].assign(all.begin() + static_cast<std::ptrdiff_t>(pos),
                                 all.begin() + static_cast<std::ptrdiff_t>(pos + sizes[k]));
                pos += sizes[k];
            }
            break;
        }
        case PartitionScheme::Pathological: {
            const std::size_t m = spec.classes_per_client;
            if (m == 0 || m > num_classes) throw DomainError("partition: invalid classes_per_client");
            if (K * m < num_classes) throw DomainError("partition: too few client class slots to cover every class");
            std::vector<std::vector<std::size_t>> holders(num_classes);
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j < m; ++j) holders[(k * m + j) % num_classes].push_back(k);
            for (std::size_t c = 0; c < num_classes; ++c) {
                const auto& pool = pools[c];
                if (pool.size() < holders[c].size())
                    throw DomainError("partition: class " + std::to_string(c) + " has fewer samples than holders");
                const auto sizes = detail::even_sizes(pool.size(), holders[c].size());
                std::size_t pos = 0;
                for (std::size_t h = 0; h < holders[c].size(); ++h) {
                    auto& shard = shards[holders[c][h]];
                    shard.insert(shard.end(), pool.begin() + static_cast<std::ptrdiff_t>(pos),
                                 pool.begin() + static_cast<std::ptrdiff_t>(pos + sizes[h]));
                    pos += sizes[h];
                }
            }
            break;
        }
        case PartitionScheme::Dirichlet: {
            if (!(spec.alpha > 0.0)) throw DomainError("partition: Dirichlet alpha must be positive");
            const std::size_t L = num_classes;
            const auto sizes = detail::even_sizes(n, K);
            std::gamma_distribution<double> gamma(spec.alpha, 1.0);
            std::uniform_int_distribution<std::size_t> pick(0, L - 1);
            std::vector<std::size_t> cursor(L, 0);
            auto remaining = [&](std::size_t c) { return pools[c].size() - cursor[c]; };
            for (std::size_t k = 0; k < K; ++k) {
                std::vector<double> q(L);
                double total = 0.0;
                for (auto& v : q) total += (v = gamma(rng));
                if (!(total > 0.0)) {
                    std::fill(q.begin(), q.end(), 0.0);
                    q[pick(rng)] = 1.0;
                    total = 1.0;
                }
                for (auto& v : q) v /= total;

                // largest-remainder rounding of q * size
                std::vector<std::size_t> want(L);
                std::vector<std::pair<double, std::size_t>> frac(L);
                std::size_t assigned = 0;
                for (std::size_t c = 0; c < L; ++c) {
                    const double exact = q[c] * static_cast<double>(sizes[k]);
                    want[c] = static_cast<std::size_t>(std::floor(exact));
                    assigned += want[c];
                    frac[c] = {exact - static_cast<double>(want[c]), c};
                }
                std::stable_sort(frac.begin(), frac.end(), [](auto& a, auto& b) { return a.first > b.first; });
                for (std::size_t j = 0; assigned < sizes[k]; ++j, ++assigned) ++want[frac[j % L].second];

                std::size_t shortfall = 0;
                for (std::size_t c = 0; c < L; ++c) {
                    const std::size_t take = std::min(want[c], remaining(c));
                    shortfall += want[c] - take;
                    for (std::size_t t = 0; t < take; ++t) shards[k].push_back(pools[c][cursor[c]++]);
                }
                while (shortfall > 0) {
                    std::size_t best = 0;
                    for (std::size_t c = 1; c < L; ++c)
                        if (remaining(c) > remaining(best)) best = c;
                    shards[k].push_back(pools[best][cursor[best]++]);
                    --shortfall;
                }
            }
            break;
        }
    }
    detail::ensure_nonempty(shards);
    for (auto& shard : shards) std::sort(shard.begin(), shard.end());
    return shards;
}

inline std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec) {
    const auto shards = partition_indices(data.labels, data.num_classes, spec);
    std::vector<Dataset> out;
    out.reserve(shards.size());
    for (const auto& s : shards) out.push_back(data.subset(s));
    return out;
}

}  // namespace fairmix
