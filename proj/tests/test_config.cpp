#include <string>

#include <gtest/gtest.h>

#include "fairmix/config.hpp"

using namespace fairmix;

namespace {

std::string parse_message(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, MinimalDefaults) {
    const auto cfg = parse_config("K: 10\nT: 5\nmethod: AAggFFS\n");
    EXPECT_EQ(cfg.K, 10u);
    EXPECT_EQ(cfg.C, 1.0);
    EXPECT_EQ(cfg.bounds_mode, BoundsMode::CrossSilo);
    EXPECT_DOUBLE_EQ(cfg.bounds().c1(), 0.0);
    EXPECT_DOUBLE_EQ(cfg.bounds().c2(), 0.1);
    EXPECT_EQ(cfg.cdf.family, CdfFamily::Normal);
    EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
    EXPECT_EQ(cfg.server_opt.kind, ServerOptimizerKind::SGD);
}

TEST(Config, CrossDeviceDefaultsToWeibull) {
    const auto cfg = parse_config("K: 100\nT: 5\nC: 0.01\nmethod: AAggFFD\nbounds_mode: CrossDevice\n");
    EXPECT_DOUBLE_EQ(cfg.bounds().c2(), 0.01);
    EXPECT_EQ(cfg.cdf.family, CdfFamily::Weibull);
    EXPECT_EQ(cfg.cdf.shape, 2.0);
}

TEST(Config, SectionsAndExplicitBounds) {
    const auto cfg = parse_config(R"(K: 4
T: 3
method: TERM
lambda: -0.5
bounds_mode: Explicit
bounds: [0.05, 0.4]
data: {samples: 400, dim: 3, classes: 3}
partition: {scheme: Pathological, classes_per_client: 1}
model: {kind: MLP, hidden: 8}
server_opt: {kind: Yogi, lr: 0.05}
seeds: [3, 1]
)");
    EXPECT_EQ(cfg.method.kind, MethodKind::TERM);
    EXPECT_EQ(cfg.method.lambda, -0.5);
    EXPECT_DOUBLE_EQ(cfg.bounds().c2(), 0.4);
    EXPECT_EQ(cfg.data.dim, 3u);
    EXPECT_EQ(cfg.partition.scheme, PartitionScheme::Pathological);
    EXPECT_EQ(cfg.model.kind, ModelKind::MLP);
    EXPECT_EQ(cfg.model.hidden, 8u);
    EXPECT_EQ(cfg.server_opt.kind, ServerOptimizerKind::Yogi);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 1}));
}

TEST(Config, UnknownKeyReportsLocation) {
    const auto msg = parse_message("K: 10\nT: 5\nmethod: Static\nlearning_rate: 0.1\n");
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;

    const auto nested = parse_message("K: 10\nT: 5\nmethod: Static\ndata:\n  sample: 10\n");
    EXPECT_NE(nested.find("data.sample"), std::string::npos) << nested;
    EXPECT_NE(nested.find("line 5"), std::string::npos) << nested;
}

TEST(Config, MissingRequiredKey) {
    EXPECT_NE(parse_message("K: 10\nmethod: Static\n").find("'T'"), std::string::npos);
    EXPECT_NE(parse_message("K: 10\nT: 3\n").find("'method'"), std::string::npos);
}

TEST(Config, TypeAndValueErrors) {
    EXPECT_NE(parse_message("K: ten\nT: 5\nmethod: Static\n").find("wrong type"), std::string::npos);
    EXPECT_NE(parse_message("K: 10\nT: 5\nmethod: FedMagic\n").find("unknown value"), std::string::npos);
    EXPECT_NE(parse_message("K: 10\nT: 5\nmethod: Static\nbounds: [0, 1]\n").find("Explicit"), std::string::npos);
    EXPECT_NE(parse_message("K: 10\nT: 5\nC: 0.5\nmethod: AAggFFS\n").find("C = 1"), std::string::npos);
    EXPECT_NE(parse_message("K: 10\nT: 5\nC: 1.5\nmethod: Static\n").find("C must"), std::string::npos);
    EXPECT_THROW(parse_config("K: [1\n"), ParseError);
}

TEST(Config, SerializeRoundTrips) {
    auto cfg = parse_config("K: 7\nT: 9\nC: 0.3\nmethod: QFedAvg\nq: 0.1\nbounds_mode: CrossDevice\n"
                            "lr: 0.07\nseeds: [0, 2]\nserver_opt: {kind: Adam, lr: 0.1}\n");
    const auto text = serialize_config(cfg);
    EXPECT_EQ(parse_config(text), cfg);
    EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(SeedList, Parses) {
    EXPECT_EQ(parse_seed_list("0,1,2"), (std::vector<std::uint64_t>{0, 1, 2}));
    EXPECT_EQ(parse_seed_list("7"), std::vector<std::uint64_t>{7});
    EXPECT_THROW(parse_seed_list("1,,2"), ParseError);
    EXPECT_THROW(parse_seed_list("x"), ParseError);
}
