#pragma once

// Independent reference computations shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "alloyfit/neural_net.hpp"

namespace oracles {

/// Ridge normal equations solved with an explicit inverse.
inline Eigen::VectorXd inverse_ridge(const Eigen::MatrixXd& B, const Eigen::VectorXd& y, double lambda,
                                     bool free_bias) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(B.cols(), B.cols()) * lambda;
    if (free_bias) P(0, 0) = 0.0;
    const Eigen::MatrixXd A = B.transpose() * B + P;
    return A.inverse() * (B.transpose() * y);
}

inline double half_sse(alloyfit::nn::Network net, const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y) {
    net.set_parameters(theta);
    return 0.5 * (alloyfit::nn::forward(net, X) - y).squaredNorm();
}

/// Central finite differences of 0.5 * SSE.
inline Eigen::VectorXd fd_gradient(const alloyfit::nn::Network& net, const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, double h = 1e-6) {
    const auto theta = net.parameters();
    Eigen::VectorXd g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        auto up = theta, down = theta;
        up(i) += h;
        down(i) -= h;
        g(i) = (half_sse(net, up, X, y) - half_sse(net, down, X, y)) / (2 * h);
    }
    return g;
}

/// Largest |a - b| / max(1, |b|) over entries.
inline double max_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a(i) - b(i)) / std::max(1.0, std::abs(b(i))));
    }
    return worst;
}

inline double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                                 double eps) {
    return 0.5 * beta.dot(K * beta) + eps * beta.cwiseAbs().sum() - y.dot(beta);
}

/// Projection onto {0 <= z <= C, sum(z[:n]) - sum(z[n:]) = 0} by bisection on the multiplier.
inline Eigen::VectorXd project_dual(const Eigen::VectorXd& v, Eigen::Index n, double C) {
    auto z_of = [&](double nu) {
        Eigen::VectorXd z(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) z(i) = std::clamp(v(i) - nu * (i < n ? 1.0 : -1.0), 0.0, C);
        return z;
    };
    double lo = -v.cwiseAbs().maxCoeff() - C - 1.0, hi = -lo;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto z = z_of(mid);
        (z.head(n).sum() - z.tail(n).sum() > 0.0 ? lo : hi) = mid;
    }
    return z_of(0.5 * (lo + hi));
}

/// Accelerated projected gradient on the 2n-variable epsilon-SVR dual; returns alpha - alpha*.
inline Eigen::VectorXd svr_dual_brute_force(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double eps,
                                            int iterations = 20000) {
    const Eigen::Index n = K.rows();
    const double L = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().maxCoeff();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * n), w = z;
    double t = 1.0;
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd kb = K * (w.head(n) - w.tail(n));
        Eigen::VectorXd g(2 * n);
        g.head(n) = kb.array() + eps - y.array();
        g.tail(n) = -kb.array() + eps + y.array();
        const Eigen::VectorXd next = project_dual(w - g / L, n, C);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        w = next + ((t - 1.0) / tn) * (next - z);
        z = next;
        t = tn;
    }
    return z.head(n) - z.tail(n);
}

}  // namespace oracles
