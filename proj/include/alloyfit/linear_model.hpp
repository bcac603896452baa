#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "alloyfit/dataset.hpp"

namespace alloyfit::linear {

struct PolynomialSpec {
    int degree = 1;
    /// false: per-feature powers only. true: every monomial of total degree <= degree.
    bool interactions = false;
    double lambda = 0.0;
};

void validate(const PolynomialSpec& spec);

std::size_t basis_size(std::size_t n_features, const PolynomialSpec& spec);

/// Per-feature ordering: [1, x0, x0^2, .., x0^d, x1, x1^2, ..].
/// Interaction ordering: [1], then degree-1 monomials, then degree 2, ...;
/// within a degree, index tuples i <= j <= .. in lexicographic order.
std::vector<double> expand_polynomial(std::span<const double> x, const PolynomialSpec& spec);
Eigen::MatrixXd expand_rows(const Eigen::MatrixXd& X, const PolynomialSpec& spec);

struct RidgeOptions {
    /// Leaves column 0 out of the penalty.
    bool unpenalized_bias = true;
};

/// Solves (B'B + lambda I')w = B'y by Cholesky. On failure adds
/// 1e-10 * trace / n to the diagonal and retries once; throws NumericalError
/// with a reciprocal-condition estimate if that also fails.
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, double lambda,
                          RidgeOptions options = {});

struct LinearModel {
    PolynomialSpec spec;
    Eigen::VectorXd weights;  // bias first
    std::optional<Scaler> scaler;
    std::size_t arity = 0;
};

/// Fits on raw features. With scale_inputs the features are min-max scaled
/// to [-1, 1] on this data before expansion.
LinearModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const PolynomialSpec& spec,
                       bool scale_inputs = true);

double predict(const LinearModel& model, std::span<const double> x);
Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X);

struct CurveRow {
    int degree = 1;
    double lambda = 0.0;
    double train_r2 = 0.0;
    double val_r2 = 0.0;
};

struct CurveTable {
    std::vector<CurveRow> rows;
    std::size_t best = 0;  // argmax of mean validation R2

    std::string to_csv() const;
};

/// Degree x lambda grid over every fold, averaging train and validation R2.
CurveTable sweep(std::span<const Sample> samples, const FoldAssignment& folds, std::span<const int> degrees,
                 std::span<const double> lambdas, bool interactions = false);

}  // namespace alloyfit::linear
