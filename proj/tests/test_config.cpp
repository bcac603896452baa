#include <gtest/gtest.h>

#include "alloyfit/config.hpp"
#include "alloyfit/error.hpp"
#include "alloyfit/pipeline.hpp"
#include "support.hpp"

using namespace alloyfit;

TEST(Config, DefaultsRoundTripThroughToml) {
    const ExperimentConfig d;
    const auto text = config_to_toml(d);
    const auto back = parse_config_toml(text);
    EXPECT_EQ(config_to_toml(back), text);
    EXPECT_EQ(back.k, 10);
    EXPECT_EQ(back.linear.lambdas.size(), 8u);
    EXPECT_EQ(back.nn.hidden.size(), 10u);
    EXPECT_EQ(back.nn.trainers.size(), 5u);
    EXPECT_EQ(back.svr.kernels.size(), 3u);
    EXPECT_EQ(back.tree.gap_tols, std::vector<double>{0.05});
    EXPECT_EQ(config_from_json(config_to_json(d)).fold_seed, d.fold_seed);
}

TEST(Config, OverridesAndPartialFiles) {
    const auto c = parse_config_toml(R"(
[data]
properties = ["yield"]
encoding = "onehot"
[folds]
k = 5
grouped = false
[svr]
kernels = ["rbf"]
C = 4
[nn]
trainers = ["rprop"]
hidden = [2, 4]
)");
    EXPECT_EQ(c.properties, std::vector<Property>{Property::Yield});
    EXPECT_EQ(c.encoding, RouteEncoding::OneHot);
    EXPECT_EQ(c.k, 5);
    EXPECT_FALSE(c.grouped);
    EXPECT_EQ(c.svr.params.C, 4.0);
    EXPECT_EQ(grid_cells(c, Family::Svr).size(), 1u);
    EXPECT_EQ(grid_cells(c, Family::NeuralNet).size(), 2u);
    EXPECT_EQ(grid_cells(c, Family::Linear).size(), 24u);
    EXPECT_EQ(describe(grid_cells(c, Family::Svr)[0]).substr(0, 8), "gaussian");
}

TEST(Config, InvalidInputsAreUsageErrors) {
    EXPECT_THROW(parse_config_toml("[folds]\nk = 1\n"), UsageError);
    EXPECT_THROW(parse_config_toml("[linear]\ndegrees = []\n"), UsageError);
    EXPECT_THROW(parse_config_toml("[mystery]\nx = 1\n"), UsageError);
    EXPECT_THROW(parse_config_toml("[folds]\nkk = 3\n"), UsageError);
    EXPECT_THROW(parse_config_toml("[folds]\nk = \"ten\"\n"), UsageError);
    EXPECT_THROW(parse_config_toml("[svr]\nkernels = [\"sigmoid\"]\n"), UsageError);
    EXPECT_THROW(parse_config_toml("this is = = not toml"), UsageError);
    EXPECT_THROW(load_config("/nonexistent/config.toml"), UsageError);
}

TEST(Pipeline, AtomicWriteAndHash) {
    const auto dir = testing_support::scratch_dir("atomic");
    const auto f = dir / "a" / "b.txt";
    write_file_atomic(f, "hello");
    write_file_atomic(f, "world");
    EXPECT_EQ(read_file(f), "world");
    std::size_t entries = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
        (void)e;
        ++entries;
    }
    EXPECT_EQ(entries, 1u);
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
