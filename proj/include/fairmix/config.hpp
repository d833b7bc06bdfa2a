#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "fairmix/aggregator.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fedsim.hpp"
#include "fairmix/modeldata.hpp"
#include "fairmix/response.hpp"

namespace fairmix {

enum class BoundsMode { CrossSilo, CrossDevice, Explicit };

inline std::string_view to_string(BoundsMode m) {
    switch (m) {
        case BoundsMode::CrossSilo: return "CrossSilo";
        case BoundsMode::CrossDevice: return "CrossDevice";
        case BoundsMode::Explicit: return "Explicit";
    }
    return "?";
}

inline std::optional<BoundsMode> bounds_mode_from_string(std::string_view s) {
    for (auto m : {BoundsMode::CrossSilo, BoundsMode::CrossDevice, BoundsMode::Explicit})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

enum class DataSource { Synthetic, Csv };

inline std::string_view to_string(DataSource s) { return s == DataSource::Synthetic ? "synthetic" : "csv"; }

struct DataConfig {
    DataSource source = DataSource::Synthetic;
    std::string path;  ///< csv only
    std::size_t samples = 2000;
    std::size_t dim = 2;
    std::size_t classes = 2;
    double separation = SyntheticOptions{}.separation;
    double spread_ratio = SyntheticOptions{}.spread_ratio;
    double test_fraction = 0.2;

    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
    std::size_t K = 0;
    std::size_t T = 0;
    double C = 1.0;
    std::size_t B = 20;
    std::size_t E = 1;
    double lr = 0.1;
    double lr_decay = 0.99;
    std::size_t decay_step = 10;
    double prox_mu = 0.0;
    double weight_decay = 0.0;
    AggregatorMethod method;
    CdfKind cdf;
    BoundsMode bounds_mode = BoundsMode::CrossSilo;
    double c1 = 0.0, c2 = 1.0;  ///< Explicit only
    DataConfig data;
    PartitionSpec partition;    ///< K and seed are filled from the top level and the run seed
    ModelSpec model;            ///< dimensions come from `data`
    ServerOptimizerSettings server_opt;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "results";

    ResponseBounds bounds() const {
        switch (bounds_mode) {
            case BoundsMode::CrossSilo: return ResponseBounds::cross_silo(K);
            case BoundsMode::CrossDevice: return ResponseBounds::cross_device(C);
            case BoundsMode::Explicit: return {c1, c2};
        }
        throw InvariantError("unknown bounds mode");
    }

    /// Throws DomainError on the first violated constraint.
    void validate() const {
        auto require = [](bool ok, const char* msg) {
            if (!ok) throw DomainError(std::string("config: ") + msg);
        };
        require(K >= 1, "K must be at least 1");
        require(T >= 1, "T must be at least 1");
        require(C > 0.0 && C <= 1.0, "C must lie in (0, 1]");
        require(B >= 1 && E >= 1, "B and E must be at least 1");
        require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
        require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
        require(decay_step >= 1, "decay_step must be at least 1");
        require(prox_mu >= 0.0 && weight_decay >= 0.0, "prox_mu and weight_decay must be nonnegative");
        require(method.q >= 0.0, "q must be nonnegative");
        require(method.lambda != 0.0 && std::isfinite(method.lambda), "lambda must be nonzero");
        require(method.prop_m > 0.0, "prop_m must be positive");
        require(method.kind != MethodKind::AAggFFS || C == 1.0, "AAggFFS needs C = 1");
        require(!seeds.empty(), "seeds must not be empty");
        require(data.test_fraction >= 0.0 && data.test_fraction < 1.0, "test_fraction must lie in [0, 1)");
        require(data.source == DataSource::Csv || data.samples >= K, "data.samples must be at least K");
        require(data.classes >= 2 && data.dim >= 1, "data needs at least two classes and one feature");
        require(partition.alpha > 0.0, "partition.alpha must be positive");
        require(partition.classes_per_client >= 1, "partition.classes_per_client must be at least 1");
        require(model.hidden >= 1, "model.hidden must be at least 1");
        cdf.validate();
        (void)bounds();
        ServerOptimizer{server_opt};
    }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline ParseError parse_error_at(const std::string& msg, const YAML::Node& node) {
    const auto m = node.Mark();
    return m.is_null() ? ParseError(msg) : ParseError(msg, m.line, m.column);
}

inline void reject_unknown(const YAML::Node& map, std::initializer_list<std::string_view> allowed,
                           const std::string& section) {
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        bool ok = false;
        for (auto a : allowed) ok = ok || a == key;
        if (!ok) throw parse_error_at("unknown config key '" + section + key + "'", kv.first);
    }
}

template <class T>
std::optional<T> read_scalar(const YAML::Node& map, const std::string& key, const std::string& section) {
    const YAML::Node n = map[key];
    if (!n) return std::nullopt;
    if (!n.IsScalar()) throw parse_error_at("config key '" + section + key + "' must be a scalar", n);
    try {
        return n.as<T>();
    } catch (const YAML::BadConversion&) {
        throw parse_error_at("config key '" + section + key + "' has the wrong type", n);
    }
}

inline std::optional<std::size_t> read_count(const YAML::Node& map, const std::string& key,
                                             const std::string& section) {
    auto v = read_scalar<long long>(map, key, section);
    if (!v) return std::nullopt;
    if (*v < 0) throw parse_error_at("config key '" + section + key + "' must be nonnegative", map[key]);
    return static_cast<std::size_t>(*v);
}

template <class Enum, class FromString>
std::optional<Enum> read_enum(const YAML::Node& map, const std::string& key, const std::string& section,
                              FromString from_string) {
    auto s = read_scalar<std::string>(map, key, section);
    if (!s) return std::nullopt;
    auto e = from_string(*s);
    if (!e) throw parse_error_at("config key '" + section + key + "' has unknown value '" + *s + "'", map[key]);
    return e;
}

inline const YAML::Node section_map(const YAML::Node& root, const std::string& key) {
    const YAML::Node n = root[key];
    if (n && !n.IsMap()) throw parse_error_at("config section '" + key + "' must be a mapping", n);
    return n;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    const YAML::Node root = [&] {
        try {
            return YAML::Load(text);
        } catch (const YAML::ParserException& e) {
            throw ParseError("config is not well-formed: " + e.msg, e.mark.line, e.mark.column);
        }
    }();
    if (!root.IsMap()) throw detail::parse_error_at("config must be a mapping", root);

    using detail::read_count;
    using detail::read_enum;
    using detail::read_scalar;
    detail::reject_unknown(root,
                           {"K", "T", "C", "B", "E", "lr", "lr_decay", "decay_step", "prox_mu", "weight_decay",
                            "method", "q", "lambda", "prop_m", "cdf", "cdf_scale", "cdf_shape", "bounds_mode",
                            "bounds", "data", "partition", "model", "server_opt", "seeds", "output_dir"},
                           "");

    ExperimentConfig cfg;
    auto required = [&](const char* key) {
        if (!root[key]) throw detail::parse_error_at(std::string("missing required config key '") + key + "'", root);
    };
    required("K");
    required("T");
    required("method");

    cfg.K = *read_count(root, "K", "");
    cfg.T = *read_count(root, "T", "");
    if (auto v = read_scalar<double>(root, "C", "")) cfg.C = *v;
    if (auto v = read_count(root, "B", "")) cfg.B = *v;
    if (auto v = read_count(root, "E", "")) cfg.E = *v;
    if (auto v = read_scalar<double>(root, "lr", "")) cfg.lr = *v;
    if (auto v = read_scalar<double>(root, "lr_decay", "")) cfg.lr_decay = *v;
    if (auto v = read_count(root, "decay_step", "")) cfg.decay_step = *v;
    if (auto v = read_scalar<double>(root, "prox_mu", "")) cfg.prox_mu = *v;
    if (auto v = read_scalar<double>(root, "weight_decay", "")) cfg.weight_decay = *v;

    cfg.method.kind = *read_enum<MethodKind>(root, "method", "", method_kind_from_string);
    if (auto v = read_scalar<double>(root, "q", "")) cfg.method.q = *v;
    if (auto v = read_scalar<double>(root, "lambda", "")) cfg.method.lambda = *v;
    if (auto v = read_scalar<double>(root, "prop_m", "")) cfg.method.prop_m = *v;

    if (auto v = read_enum<BoundsMode>(root, "bounds_mode", "", bounds_mode_from_string)) cfg.bounds_mode = *v;
    if (const YAML::Node b = root["bounds"]) {
        if (cfg.bounds_mode != BoundsMode::Explicit)
            throw detail::parse_error_at("config key 'bounds' requires bounds_mode: Explicit", b);
        if (!b.IsSequence() || b.size() != 2)
            throw detail::parse_error_at("config key 'bounds' must be a two-element list [c1, c2]", b);
        try {
            cfg.c1 = b[0].as<double>();
            cfg.c2 = b[1].as<double>();
        } catch (const YAML::BadConversion&) {
            throw detail::parse_error_at("config key 'bounds' has the wrong type", b);
        }
    } else if (cfg.bounds_mode == BoundsMode::Explicit) {
        throw detail::parse_error_at("bounds_mode Explicit needs a 'bounds' list", root);
    }

    const CdfFamily default_family =
        cfg.bounds_mode == BoundsMode::CrossDevice ? CdfFamily::Weibull : CdfFamily::Normal;
    cfg.cdf = CdfKind::with_defaults(
        read_enum<CdfFamily>(root, "cdf", "", cdf_family_from_string).value_or(default_family));
    if (auto v = read_scalar<double>(root, "cdf_scale", "")) cfg.cdf.scale = *v;
    if (auto v = read_scalar<double>(root, "cdf_shape", "")) cfg.cdf.shape = *v;

    if (const YAML::Node d = detail::section_map(root, "data")) {
        detail::reject_unknown(d, {"source", "path", "samples", "dim", "classes", "separation", "spread_ratio",
                                   "test_fraction"},
                               "data.");
        if (auto s = read_scalar<std::string>(d, "source", "data.")) {
            if (*s == "synthetic") cfg.data.source = DataSource::Synthetic;
            else if (*s == "csv") cfg.data.source = DataSource::Csv;
            else throw detail::parse_error_at("config key 'data.source' has unknown value '" + *s + "'", d["source"]);
        }
        if (auto v = read_scalar<std::string>(d, "path", "data.")) cfg.data.path = *v;
        if (auto v = read_count(d, "samples", "data.")) cfg.data.samples = *v;
        if (auto v = read_count(d, "dim", "data.")) cfg.data.dim = *v;
        if (auto v = read_count(d, "classes", "data.")) cfg.data.classes = *v;
        if (auto v = read_scalar<double>(d, "separation", "data.")) cfg.data.separation = *v;
        if (auto v = read_scalar<double>(d, "spread_ratio", "data.")) cfg.data.spread_ratio = *v;
        if (auto v = read_scalar<double>(d, "test_fraction", "data.")) cfg.data.test_fraction = *v;
        if (cfg.data.source == DataSource::Csv && cfg.data.path.empty())
            throw detail::parse_error_at("data.source csv needs data.path", d);
    }

    if (const YAML::Node p = detail::section_map(root, "partition")) {
        detail::reject_unknown(p, {"scheme", "alpha", "classes_per_client"}, "partition.");
        if (auto v = read_enum<PartitionScheme>(p, "scheme", "partition.", partition_scheme_from_string))
            cfg.partition.scheme = *v;
        if (auto v = read_scalar<double>(p, "alpha", "partition.")) cfg.partition.alpha = *v;
        if (auto v = read_count(p, "classes_per_client", "partition.")) cfg.partition.classes_per_client = *v;
    }
    cfg.partition.K = cfg.K;

    if (const YAML::Node m = detail::section_map(root, "model")) {
        detail::reject_unknown(m, {"kind", "hidden"}, "model.");
        if (auto v = read_enum<ModelKind>(m, "kind", "model.", model_kind_from_string)) cfg.model.kind = *v;
        if (auto v = read_count(m, "hidden", "model.")) cfg.model.hidden = *v;
    }
    cfg.model.input_dim = cfg.data.dim;
    cfg.model.num_classes = cfg.data.classes;

    if (const YAML::Node s = detail::section_map(root, "server_opt")) {
        detail::reject_unknown(s, {"kind", "lr", "beta1", "beta2", "tau"}, "server_opt.");
        if (auto v = read_enum<ServerOptimizerKind>(s, "kind", "server_opt.", server_optimizer_from_string))
            cfg.server_opt.kind = *v;
        if (auto v = read_scalar<double>(s, "lr", "server_opt.")) cfg.server_opt.lr = *v;
        if (auto v = read_scalar<double>(s, "beta1", "server_opt.")) cfg.server_opt.beta1 = *v;
        if (auto v = read_scalar<double>(s, "beta2", "server_opt.")) cfg.server_opt.beta2 = *v;
        if (auto v = read_scalar<double>(s, "tau", "server_opt.")) cfg.server_opt.tau = *v;
    }

    if (const YAML::Node s = root["seeds"]) {
        if (!s.IsSequence()) throw detail::parse_error_at("config key 'seeds' must be a list", s);
        cfg.seeds.clear();
        for (const auto& item : s) {
            long long v = 0;
            try {
                v = item.as<long long>();
            } catch (const YAML::BadConversion&) {
                throw detail::parse_error_at("config key 'seeds' must hold integers", item);
            }
            if (v < 0) throw detail::parse_error_at("config key 'seeds' must hold nonnegative integers", item);
            cfg.seeds.push_back(static_cast<std::uint64_t>(v));
        }
    }
    if (auto v = read_scalar<std::string>(root, "output_dir", "")) cfg.output_dir = *v;

    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
    return cfg;
}

/// Canonical form: every key present, fixed order, shortest round-trip numbers.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    using detail::format_double;
    std::ostringstream out;
    auto quoted = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') q += '\\';
            q += c;
        }
        return q + "\"";
    };
    out << "K: " << cfg.K << "\n"
        << "T: " << cfg.T << "\n"
        << "C: " << format_double(cfg.C) << "\n"
        << "B: " << cfg.B << "\n"
        << "E: " << cfg.E << "\n"
        << "lr: " << format_double(cfg.lr) << "\n"
        << "lr_decay: " << format_double(cfg.lr_decay) << "\n"
        << "decay_step: " << cfg.decay_step << "\n"
        << "prox_mu: " << format_double(cfg.prox_mu) << "\n"
        << "weight_decay: " << format_double(cfg.weight_decay) << "\n"
        << "method: " << to_string(cfg.method.kind) << "\n"
        << "q: " << format_double(cfg.method.q) << "\n"
        << "lambda: " << format_double(cfg.method.lambda) << "\n"
        << "prop_m: " << format_double(cfg.method.prop_m) << "\n"
        << "cdf: " << to_string(cfg.cdf.family) << "\n"
        << "cdf_scale: " << format_double(cfg.cdf.scale) << "\n"
        << "cdf_shape: " << format_double(cfg.cdf.shape) << "\n"
        << "bounds_mode: " << to_string(cfg.bounds_mode) << "\n";
    if (cfg.bounds_mode == BoundsMode::Explicit)
        out << "bounds: [" << format_double(cfg.c1) << ", " << format_double(cfg.c2) << "]\n";
    out << "data:\n"
        << "  source: " << to_string(cfg.data.source) << "\n";
    if (cfg.data.source == DataSource::Csv) out << "  path: " << quoted(cfg.data.path) << "\n";
    out << "  samples: " << cfg.data.samples << "\n"
        << "  dim: " << cfg.data.dim << "\n"
        << "  classes: " << cfg.data.classes << "\n"
        << "  separation: " << format_double(cfg.data.separation) << "\n"
        << "  spread_ratio: " << format_double(cfg.data.spread_ratio) << "\n"
        << "  test_fraction: " << format_double(cfg.data.test_fraction) << "\n"
        << "partition:\n"
        << "  scheme: " << to_string(cfg.partition.scheme) << "\n"
        << "  alpha: " << format_double(cfg.partition.alpha) << "\n"
        << "  classes_per_client: " << cfg.partition.classes_per_client << "\n"
        << "model:\n"
        << "  kind: " << to_string(cfg.model.kind) << "\n"
        << "  hidden: " << cfg.model.hidden << "\n"
        << "server_opt:\n"
        << "  kind: " << to_string(cfg.server_opt.kind) << "\n"
        << "  lr: " << format_double(cfg.server_opt.lr) << "\n"
        << "  beta1: " << format_double(cfg.server_opt.beta1) << "\n"
        << "  beta2: " << format_double(cfg.server_opt.beta2) << "\n"
        << "  tau: " << format_double(cfg.server_opt.tau) << "\n"
        << "seeds: [";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? ", " : "") << cfg.seeds[i];
    out << "]\n"
        << "output_dir: " << quoted(cfg.output_dir) << "\n";
    return out.str();
}

/// Comma-separated list of nonnegative integers, as given to --seeds.
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string_view item = text.substr(pos, comma - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        std::uint64_t v = 0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc{} || res.ptr != item.data() + item.size())
            throw ParseError("--seeds: '" + std::string(item) + "' is not a nonnegative integer", 0,
                             static_cast<int>(pos));
        seeds.push_back(v);
        pos = comma + 1;
    }
    return seeds;
}

}  // namespace fairmix
