#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "alloyfit/error.hpp"
#include "alloyfit/parallel.hpp"
#include "alloyfit/svr.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace alloyfit;
using namespace alloyfit::svr;
using testing_support::random_matrix;
using testing_support::random_vector;
using testing_support::row;

namespace {

Eigen::VectorXd smooth_target(const Eigen::MatrixXd& X, Rng& rng, double noise = 0.05) {
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        y(i) = std::sin(2.0 * X(i, 0)) + X(i, 1) * X(i, 2) + noise * rng.normal();
    }
    return y;
}

}  // namespace

TEST(Kernel, HandCases) {
    const std::vector<double> x = {1, 2}, z = {3, 4}, one = {1};
    EXPECT_EQ(kernel_eval({KernelKind::Gaussian, 3, 0.7, 1}, x, x), 1.0);
    EXPECT_EQ(kernel_eval({KernelKind::Linear, 3, 1, 1}, x, z), 11.0);
    EXPECT_EQ(kernel_eval({KernelKind::Polynomial, 2, 1, 1}, one, one), 4.0);
    EXPECT_THROW(kernel_eval({}, x, one), UsageError);
    EXPECT_EQ(parse_kernel("rbf"), KernelKind::Gaussian);
    EXPECT_EQ(parse_kernel("gaussian"), KernelKind::Gaussian);
    EXPECT_THROW(parse_kernel("sigmoid"), UsageError);
}

TEST(Kernel, GaussianGramIsPsdAndParallelMatchesSerial) {
    Rng rng(10);
    for (int t = 0; t < 5; ++t) {
        const auto X = random_matrix(rng, 50, 4);
        const KernelSpec spec{KernelKind::Gaussian, 3, rng.uniform(0.1, 5.0), 1};
        const auto K = kernel_matrix(spec, X);
        EXPECT_EQ(K, K.transpose());
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff(), -1e-8);
        EXPECT_EQ(K, serial::kernel_matrix(spec, X));
    }
    const auto X = random_matrix(rng, 400, 5);
    set_jobs(4);
    const auto K = kernel_matrix({KernelKind::Polynomial, 3, 1, 1}, X);
    set_jobs(1);
    EXPECT_EQ(K, serial::kernel_matrix({KernelKind::Polynomial, 3, 1, 1}, X));
}

TEST(Fit, ConstantTargets) {
    Rng rng(2);
    const auto X = random_matrix(rng, 40, 3);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(40, 0.7);
    const auto m = fit_svr(X, y, {}, {});
    EXPECT_EQ(m.coefficients.size(), 0);
    EXPECT_NEAR(m.bias, 0.7, 1e-12);
    EXPECT_NEAR(decision(m, row(X, 5)), 0.7, 1e-12);
    EXPECT_EQ(kkt_violation(m, X, y), 0.0);
}

TEST(Fit, LinearSlopeNearLeastSquares) {
    Rng rng(3);
    const auto X = random_matrix(rng, 100, 1);
    Eigen::VectorXd y(100);
    for (int i = 0; i < 100; ++i) y(i) = 3.0 * X(i, 0) + rng.uniform(-0.01, 0.01);
    SvrParams p;
    p.C = 10.0;
    const auto m = fit_svr(X, y, {KernelKind::Linear, 1, 1, 0}, p);
    const double slope = m.support_vectors.col(0).dot(m.coefficients);
    const Eigen::VectorXd xc = X.col(0).array() - X.col(0).mean();
    const double ls = xc.dot(y) / xc.squaredNorm();
    EXPECT_LE(std::abs(slope - ls), 0.05 * std::abs(ls));
}

TEST(Fit, KktBoxTubeAndKernelSum) {
    Rng rng(4);
    for (auto kind : {KernelKind::Linear, KernelKind::Polynomial, KernelKind::Gaussian}) {
        const auto X = random_matrix(rng, 200, 3);
        const auto y = smooth_target(X, rng);
        SvrParams p;
        const KernelSpec spec{kind, 3, 1.0, 1.0};
        const auto m = fit_svr(X, y, spec, p);
        ASSERT_EQ(m.status, FitStatus::Converged) << kernel_name(kind);
        EXPECT_LE(kkt_violation(m, X, y), p.tolerance) << kernel_name(kind);
        EXPECT_LE(m.coefficients.cwiseAbs().maxCoeff(), p.C + 1e-12);
        const auto beta = dense_coefficients(m, X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            double f = m.bias;
            for (Eigen::Index j = 0; j < X.rows(); ++j) {
                if (beta(j) != 0.0) f += beta(j) * kernel_eval(spec, row(X, j), row(X, i));
            }
            EXPECT_NEAR(decision(m, row(X, i)), f, 1e-12);
            if (beta(i) == 0.0) {
                EXPECT_LE(std::abs(f - y(i)), p.epsilon + p.tolerance);
            } else if (std::abs(beta(i)) < p.C) {
                EXPECT_LE(std::abs(std::abs(f - y(i)) - p.epsilon), p.tolerance);
            }
        }
    }
}

TEST(Fit, ZeroedBiasViolatesKkt) {
    Rng rng(5);
    const auto X = random_matrix(rng, 120, 3);
    Eigen::VectorXd y = smooth_target(X, rng);
    y.array() += 2.0;
    auto m = fit_svr(X, y, {KernelKind::Gaussian, 3, 1.0, 1.0}, {});
    EXPECT_LE(kkt_violation(m, X, y), 1e-3);
    m.bias = 0.0;
    EXPECT_GT(kkt_violation(m, X, y), 1e-3);
}

TEST(Fit, DualObjectiveMatchesProjectedGradient) {
    Rng rng(6);
    for (auto kind : {KernelKind::Linear, KernelKind::Gaussian}) {
        const auto X = random_matrix(rng, 30, 3);
        const auto y = smooth_target(X, rng, 0.2);
        const KernelSpec spec{kind, 3, 1.5, 1.0};
        SvrParams p;
        p.C = 2.0;
        const auto m = fit_svr(X, y, spec, p);
        const auto K = serial::kernel_matrix(spec, X);
        const double smo = oracles::svr_dual_objective(K, y, dense_coefficients(m, 30), p.epsilon);
        const double ref = oracles::svr_dual_objective(K, y, oracles::svr_dual_brute_force(K, y, p.C, p.epsilon), p.epsilon);
        EXPECT_LE(std::abs(smo - ref), 1e-3 * std::abs(ref)) << kernel_name(kind) << " " << smo << " vs " << ref;
    }
}

TEST(Fit, IterationLimitIsReportedNotThrown) {
    Rng rng(7);
    const auto X = random_matrix(rng, 100, 3);
    const auto y = smooth_target(X, rng);
    SvrParams p;
    p.max_passes = 1;
    p.tolerance = 1e-12;
    const auto m = fit_svr(X, y, {}, p);
    EXPECT_EQ(m.status, FitStatus::IterationLimit);
    EXPECT_GT(m.final_gap, 0.0);
}

TEST(Fit, ParametersValidated) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 2);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
    EXPECT_THROW(fit_svr(X, y, {}, {}), DataError);
    SvrParams p;
    p.C = 0.0;
    EXPECT_THROW(validate(p), UsageError);
    EXPECT_THROW(validate(KernelSpec{KernelKind::Gaussian, 3, 0.0, 1}), UsageError);
}

TEST(Fit, CacheSizeDoesNotChangeResult) {
    Rng rng(8);
    const auto X = random_matrix(rng, 150, 3);
    const auto y = smooth_target(X, rng);
    SvrParams big, tiny;
    tiny.cache_mb = 0.0;
    const auto a = fit_svr(X, y, {}, big);
    const auto b = fit_svr(X, y, {}, tiny);
    EXPECT_EQ(a.coefficients, b.coefficients);
    EXPECT_EQ(a.bias, b.bias);
}
