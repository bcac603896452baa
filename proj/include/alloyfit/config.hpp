#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "alloyfit/dataset.hpp"
#include "alloyfit/families.hpp"

namespace alloyfit {

struct LinearGrid {
    std::vector<int> degrees = {1, 2, 3};
    std::vector<double> lambdas = {0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    bool interactions = false;
};

struct NnGrid {
    std::vector<int> hidden = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<nn::Algorithm> trainers = {nn::Algorithm::Gd, nn::Algorithm::GdMomentum, nn::Algorithm::Rprop,
                                           nn::Algorithm::Lm, nn::Algorithm::LmL2};
    nn::TrainerSpec base;
    std::size_t max_train_samples = 2000;
};

struct SvrGrid {
    std::vector<svr::KernelKind> kernels = {svr::KernelKind::Linear, svr::KernelKind::Polynomial,
                                            svr::KernelKind::Gaussian};
    double gamma = 0.0;  // 0 = automatic
    int degree = 3;
    double coef0 = 1.0;
    svr::SvrParams params;
    std::size_t max_train_samples = 2000;
};

struct TreeGrid {
    std::vector<std::size_t> min_leaf = {1};
    int max_depth = -1;
    std::vector<double> gap_tols = {0.05};
};

struct SynthSettings {
    std::size_t records = 207;
    std::uint64_t seed = 20180619;
    double noise_scale = 1.0;  // multiplies the ground-truth noise levels
};

struct ExperimentConfig {
    std::string dataset = "data/alloys_synth.csv";
    std::vector<Property> properties = {kAllProperties.begin(), kAllProperties.end()};
    RouteEncoding encoding = RouteEncoding::Ordinal;
    std::size_t max_combinations = 4096;

    int k = 10;
    std::uint64_t fold_seed = 20180619;
    bool grouped = true;

    std::string out_dir = "out";
    int jobs = 1;
    double alpha = 0.05;

    SynthSettings synth;
    LinearGrid linear;
    NnGrid nn;
    SvrGrid svr;
    TreeGrid tree;
};

/// Throws UsageError on empty grids, k < 2 and similar.
void validate(const ExperimentConfig& config);

/// Expands the family's section into concrete grid cells.
std::vector<FamilyCell> grid_cells(const ExperimentConfig& config, Family family);

ExperimentConfig parse_config_toml(std::string_view text);
std::string config_to_toml(const ExperimentConfig& config);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view text);

/// Reads a TOML config, or the config snapshot inside a run manifest (.json).
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace alloyfit
