#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fairmix/config.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fedsim.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/modeldata.hpp"

namespace fairmix {

/// Builds the seeded simulation described by `cfg`. Data, partition and split all derive from `seed`.
inline SimulationSetup build_setup(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t threads = 1) {
    cfg.validate();
    Dataset data;
    if (cfg.data.source == DataSource::Csv) {
        data = load_csv_file(cfg.data.path);
        if (data.dim != cfg.data.dim || data.num_classes > cfg.data.classes)
            throw DomainError("config: data.dim / data.classes do not match " + cfg.data.path);
        data.num_classes = cfg.data.classes;
    } else {
        data = make_synthetic(cfg.data.samples, cfg.data.dim, cfg.data.classes, seed,
                              {cfg.data.separation, cfg.data.spread_ratio});
    }
    PartitionSpec pspec = cfg.partition;
    pspec.K = cfg.K;
    pspec.seed = seed;

    SimulationSetup setup;
    setup.model = cfg.model;
    setup.clients = split_clients(partition(data, pspec), cfg.data.test_fraction, seed);
    setup.method = cfg.method;
    setup.cdf = cfg.cdf;
    setup.bounds = cfg.bounds();
    setup.C = cfg.C;
    setup.local = {cfg.E, cfg.B, cfg.lr, cfg.prox_mu, cfg.weight_decay};
    setup.lr_decay = cfg.lr_decay;
    setup.decay_step = cfg.decay_step;
    setup.server = cfg.server_opt;
    setup.seed = seed;
    setup.threads = threads;
    return setup;
}

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<RoundReport> reports;
    PerformanceSummary final_eval;  ///< client accuracy after the last round
};

inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t threads = 1) {
    Simulation sim(build_setup(cfg, seed, threads));
    SeedResult out;
    out.seed = seed;
    out.reports = sim.run(cfg.T);
    out.final_eval = out.reports.empty() ? performance_summary(sim.evaluate_clients()) : out.reports.back().eval;
    return out;
}

namespace detail {

inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

template <class Range, class Fmt>
std::string joined(const Range& values, Fmt fmt) {
    std::string s;
    bool first = true;
    for (const auto& v : values) {
        if (!first) s += ';';
        s += fmt(v);
        first = false;
    }
    return s;
}

}  // namespace detail

inline constexpr const char* kRoundsHeader =
    "round,sampled_ids,mean_feedback,decision_loss,decision,eval_avg,eval_worst10,eval_best10,gini_x100,gap";
inline constexpr const char* kSummaryHeader = "seed,average,worst10,best10,gini_x100,gap";

inline void write_rounds_csv(std::ostream& out, std::span<const RoundReport> reports) {
    using detail::fmt12;
    out << kRoundsHeader << '\n';
    for (const auto& r : reports) {
        out << r.round << ',' << detail::joined(r.sampled, [](std::size_t i) { return std::to_string(i); }) << ','
            << fmt12(r.mean_feedback) << ',' << fmt12(r.decision_loss) << ','
            << detail::joined(r.decision, fmt12) << ',' << fmt12(r.eval.average) << ','
            << fmt12(r.eval.worst10) << ',' << fmt12(r.eval.best10) << ',' << fmt12(r.eval.gini_x100) << ','
            << fmt12(r.eval.acc_parity_gap) << '\n';
    }
}

/// One row per seed, then the across-seed mean and sample standard deviation rows.
inline void write_summary_csv(std::ostream& out, std::span<const std::uint64_t> seeds,
                              std::span<const PerformanceSummary> summaries) {
    using detail::fmt12;
    if (seeds.size() != summaries.size()) throw InvalidDimensionError("write_summary_csv: length mismatch");
    out << kSummaryHeader << '\n';
    auto fields = [](const PerformanceSummary& s) {
        return std::vector<double>{s.average, s.worst10, s.best10, s.gini_x100, s.acc_parity_gap};
    };
    const std::size_t n = summaries.size();
    std::vector<double> mean(5, 0.0), sq(5, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = fields(summaries[i]);
        out << seeds[i];
        for (std::size_t j = 0; j < f.size(); ++j) {
            out << ',' << fmt12(f[j]);
            mean[j] += f[j];
        }
        out << '\n';
    }
    if (n == 0) return;
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = fields(summaries[i]);
        for (std::size_t j = 0; j < f.size(); ++j) sq[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
    }
    out << "mean";
    for (double m : mean) out << ',' << fmt12(m);
    out << "\nstd";
    for (double s : sq) out << ',' << fmt12(n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 0.0);
    out << '\n';
}

inline std::filesystem::path rounds_path(const std::filesystem::path& dir, std::uint64_t seed) {
    return dir / ("rounds_seed" + std::to_string(seed) + ".csv");
}

/// Writes rounds_seed<seed>.csv per seed and summary.csv into `dir`.
inline void write_results(std::span<const SeedResult> results, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + p.string() + " for writing");
        return f;
    };
    std::vector<std::uint64_t> seeds;
    std::vector<PerformanceSummary> summaries;
    for (const auto& r : results) {
        const auto path = rounds_path(dir, r.seed);
        auto f = open(path);
        write_rounds_csv(f, r.reports);
        if (!f.flush()) throw IoError("write failed: " + path.string());
        seeds.push_back(r.seed);
        summaries.push_back(r.final_eval);
    }
    const auto path = dir / "summary.csv";
    auto f = open(path);
    write_summary_csv(f, seeds, summaries);
    if (!f.flush()) throw IoError("write failed: " + path.string());
}

/// Runs every seed of `cfg` and writes results to cfg.output_dir. Returns a process exit status.
inline int run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1, std::ostream& diag = std::cerr) {
    try {
        std::vector<SeedResult> results;
        for (auto seed : cfg.seeds) results.push_back(run_seed(cfg, seed, threads));
        write_results(results, cfg.output_dir);
        return 0;
    } catch (const DivergenceError& e) {
        diag << "error: divergence: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        diag << "error: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        diag << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fairmix
