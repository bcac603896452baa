#pragma once

// Uniform fit/predict contract over the four model families, and the
// shared-fold cross-validation harness that scores them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "alloyfit/dataset.hpp"
#include "alloyfit/evalstat.hpp"
#include "alloyfit/linear_model.hpp"
#include "alloyfit/neural_net.hpp"
#include "alloyfit/reg_tree.hpp"
#include "alloyfit/svr.hpp"

namespace alloyfit {

enum class Family { Linear, NeuralNet, Svr, Tree };
inline constexpr std::array<Family, 4> kAllFamilies = {Family::NeuralNet, Family::Svr, Family::Tree, Family::Linear};

std::string_view family_name(Family f);   // linear | nn | svr | tree
std::string_view family_label(Family f);  // LR | NN | SVR | DT
Family parse_family(std::string_view name);

struct LinearCell {
    linear::PolynomialSpec spec;
};

struct NnCell {
    int n_hidden = 5;
    nn::TrainerSpec trainer;
    std::size_t max_train_samples = 0;  // 0 = no cap
};

struct SvrCell {
    svr::KernelSpec kernel;
    bool auto_gamma = true;  // gamma = 1 / (d * var) on the scaled training features
    svr::SvrParams params;
    std::size_t max_train_samples = 2000;
};

struct TreeCell {
    tree::GrowParams grow;
    tree::PrunePolicy prune;
};

using FamilyCell = std::variant<LinearCell, NnCell, SvrCell, TreeCell>;

Family family_of(const FamilyCell& cell);
std::string describe(const FamilyCell& cell);

struct NnModel {
    nn::Network net;
    Scaler scaler;
    std::vector<nn::EpochRecord> history;
};

struct TreeModel {
    tree::RegressionTree tree;
    std::size_t prune_step = 0;
    double train_r2 = 0.0;
    double val_r2 = 0.0;
    bool within_tolerance = false;
};

struct TrainedModel {
    FamilyCell cell;
    std::variant<linear::LinearModel, NnModel, svr::SvrModel, TreeModel> model;

    double predict(std::span<const double> x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

/// Deterministic subsample of at most `cap` indices, kept in ascending order.
std::vector<std::size_t> subsample(std::vector<std::size_t> rows, std::size_t cap, std::uint64_t seed);

/// Fits one cell on every fold except `fold`, using that fold for
/// validation (early stopping, pruning). `seed` is already fold-specific.
TrainedModel fit_cell(const FamilyCell& cell, std::span<const Sample> samples, const FoldAssignment& folds, int fold,
                      std::uint64_t seed);

struct FoldOutcome {
    double val_r2 = 0.0;
    double test_r2 = 0.0;
    double test_eqm = 0.0;
    Eigen::VectorXd test_predictions;
    TrainedModel model;
    std::string error;  // non-empty when the fit failed; metrics are then NaN

    bool ok() const noexcept { return error.empty(); }
};

struct CellEvaluation {
    FamilyCell cell;
    std::vector<FoldOutcome> folds;

    /// Averages over successful folds.
    double mean_val_r2() const;
    double mean_test_r2() const;
    std::size_t failed_folds() const;
};

struct GridResult {
    Family family = Family::Linear;
    std::vector<CellEvaluation> cells;
    std::size_t selected = 0;
    /// Friedman test over cells (folds as blocks, validation R2 as score);
    /// present for nn/svr grids with more than one cell.
    std::optional<FriedmanResult> variant_test;

    const CellEvaluation& best() const { return cells[selected]; }
};

/// Cross-validates every cell on the shared folds; (cell, fold) fits run in
/// parallel. Numerical or data failures are recorded on the fold. Only cells
/// without failed folds compete: linear and tree grids select by mean
/// validation R2; nn and svr grids select the lowest Friedman mean rank of
/// validation R2, ties broken by mean validation R2. If every cell has a
/// failed fold the cell with the most successes is kept; if nothing
/// succeeded a NumericalError is thrown.
GridResult cross_validate_grid(std::span<const FamilyCell> cells, std::span<const Sample> samples,
                               const FoldAssignment& folds, std::span<const Sample> test, std::uint64_t seed);

/// Single-cell cross-validation report (test R2/EQM per fold predictor).
EvalReport cross_validate(const FamilyCell& cell, std::span<const Sample> samples, const FoldAssignment& folds,
                          std::span<const Sample> test, std::uint64_t seed, std::string_view property);

EvalReport make_report(const CellEvaluation& evaluation, Family family, std::string_view property);

/// Versioned JSON text for a fitted model.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view text);

}  // namespace alloyfit
