#pragma once

#include <optional>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "alloyfit/dataset.hpp"

namespace alloyfit::svr {

enum class KernelKind { Linear, Polynomial, Gaussian };
std::string_view kernel_name(KernelKind k);
/// Accepts "rbf" as a synonym of "gaussian".
KernelKind parse_kernel(std::string_view name);

struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    int degree = 3;      // polynomial
    double gamma = 1.0;  // gaussian
    double coef0 = 1.0;  // polynomial
};

void validate(const KernelSpec& spec);

/// linear: x'z, polynomial: (x'z + coef0)^degree, gaussian: exp(-gamma |x - z|^2).
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

/// Gram matrix of the rows of X, rows filled in parallel.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);

namespace serial {
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);
}

/// 1 / (n_features * variance of all entries of X); 1 when X has no spread.
double default_gamma(const Eigen::MatrixXd& X);

struct SvrParams {
    double C = 1.0;
    double epsilon = 0.1;
    double tolerance = 1e-3;
    /// Iteration cap is max_passes * 2n.
    int max_passes = 1000;
    double cache_mb = 100.0;
};

void validate(const SvrParams& params);

enum class FitStatus { Converged, IterationLimit };

struct SvrModel {
    KernelSpec kernel;
    double C = 1.0;
    double epsilon = 0.1;
    Eigen::MatrixXd support_vectors;  // one row per support vector, scaled space
    Eigen::VectorXd coefficients;     // alpha - alpha*
    std::vector<std::size_t> support_indices;  // training rows; empty after deserialization
    double bias = 0.0;
    std::optional<Scaler> scaler;     // set when fitted on raw data

    FitStatus status = FitStatus::Converged;
    double final_gap = 0.0;  // max violating pair gap at exit
    long iterations = 0;
};

/// epsilon-SVR by SMO on already-scaled data.
SvrModel fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& kernel,
                 const SvrParams& params);

/// Kernel expansion plus bias, in the space the model was fitted in.
double decision(const SvrModel& model, std::span<const double> x_scaled);

/// Applies the model's scaler (if any) to x and maps the output back to target units.
double predict(const SvrModel& model, std::span<const double> x);
Eigen::VectorXd predict(const SvrModel& model, const Eigen::MatrixXd& X);

/// Largest epsilon-KKT residual over the training data (X, y) in the fitted
/// space. Predictions are recomputed by explicit kernel sums; rows outside
/// the support set carry a zero coefficient.
double kkt_violation(const SvrModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Coefficient vector aligned with the n training rows (zeros off the support set).
Eigen::VectorXd dense_coefficients(const SvrModel& model, Eigen::Index n);

}  // namespace alloyfit::svr
