#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairmix/fairmix.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fairmix::IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    for (auto v : fairmix::parse_seed_list(text)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

int cmd_run(const std::string& config_path, const std::string& output, const std::string& seeds,
            std::size_t threads) {
    auto cfg = fairmix::parse_config(read_file(config_path));
    if (!output.empty()) cfg.output_dir = output;
    if (!seeds.empty()) cfg.seeds = fairmix::parse_seed_list(seeds);
    const int status = fairmix::run_experiment(cfg, threads);
    if (status == 0) std::cout << "wrote " << cfg.seeds.size() << " seed(s) to " << cfg.output_dir << "\n";
    return status;
}

int cmd_regret_bench(std::size_t K, const std::string& horizons, std::uint64_t seed, const std::string& output) {
    const auto bounds = fairmix::ResponseBounds::cross_silo(K);
    const auto rows = fairmix::regret_bench(K, parse_sizes(horizons), bounds, seed);
    std::ostringstream csv;
    csv << "method,sequence,K,T,regret,bound,within\n";
    bool ok = true;
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%s,%s,%zu,%zu,%.12g,%.12g,%d\n",
                      std::string(fairmix::to_string(r.method)).c_str(),
                      std::string(fairmix::to_string(r.sequence)).c_str(), r.K, r.T, r.regret, r.bound,
                      r.within() ? 1 : 0);
        csv << line;
        ok = ok && r.within();
    }
    std::cout << csv.str();
    if (!output.empty()) {
        std::ofstream f(output, std::ios::binary);
        if (!(f << csv.str())) throw fairmix::IoError("cannot write " + output);
    }
    return ok ? 0 : 2;
}

int cmd_unify_check(std::size_t instances, std::uint64_t seed, double tol) {
    bool ok = true;
    for (const auto& m : fairmix::baseline_grid()) {
        const auto row = fairmix::unify_check(m, instances, seed);
        const bool pass = row.max_error <= tol;
        ok = ok && pass;
        std::printf("%-9s q=%-4g lambda=%-4g M=%-4g instances=%zu max_err=%.3e %s\n",
                    std::string(fairmix::to_string(m.kind)).c_str(), m.q, m.lambda, m.prop_m, row.instances,
                    row.max_error, pass ? "ok" : "MISMATCH");
    }
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-aware federated aggregation"};
    app.require_subcommand(1);

    std::string config_path, output, seeds;
    std::size_t threads = 1;
    auto* run = app.add_subcommand("run", "run an experiment config and write CSV results");
    run->add_option("--config", config_path, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
    run->add_option("--output", output, "output directory (overrides output_dir)");
    run->add_option("--seeds", seeds, "comma-separated seeds (overrides seeds)");
    run->add_option("--threads", threads, "client worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);

    std::size_t K = 8;
    std::string horizons = "100,500,2000";
    std::uint64_t seed = 0;
    std::string bench_out;
    auto* bench = app.add_subcommand("regret-bench", "regret of the online aggregators on synthetic sequences");
    bench->add_option("--K", K, "number of clients")->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
    bench->add_option("--T", horizons, "comma-separated horizons");
    bench->add_option("--seed", seed, "sequence seed");
    bench->add_option("--output", bench_out, "also write the table to this CSV file");

    std::size_t instances = 100;
    double tol = 1e-9;
    auto* unify = app.add_subcommand("unify-check", "baseline closed forms vs their one-step EG forms");
    unify->add_option("--instances", instances, "random instances per baseline");
    unify->add_option("--seed", seed, "instance seed");
    unify->add_option("--tol", tol, "max allowed infinity-norm gap");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, output, seeds, threads);
        if (*bench) return cmd_regret_bench(K, horizons, seed, bench_out);
        if (*unify) return cmd_unify_check(instances, seed, tol);
    } catch (const fairmix::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 64;
    } catch (const fairmix::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
