#include <gtest/gtest.h>

#include <cmath>

#include "alloyfit/error.hpp"
#include "alloyfit/neural_net.hpp"
#include "alloyfit/parallel.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace alloyfit;
using namespace alloyfit::nn;
using testing_support::random_matrix;
using testing_support::random_vector;

namespace {

Network zero_network(int inputs, int hidden) {
    auto net = init_network({inputs, hidden, 0});
    net.set_parameters(Eigen::VectorXd::Zero(net.parameter_count()));
    return net;
}

}  // namespace

TEST(Network, InitShapeRangeDeterminism) {
    const auto a = init_network({10, 3, 42});
    const auto b = init_network({10, 3, 42});
    EXPECT_EQ(a.parameter_count(), 37);
    EXPECT_EQ(a.parameters(), b.parameters());
    EXPECT_NE(a.parameters(), init_network({10, 3, 43}).parameters());
    EXPECT_LE(a.parameters().cwiseAbs().maxCoeff(), 0.5);
    EXPECT_THROW(validate(NetworkSpec{10, 0, 0}), UsageError);
    EXPECT_THROW(validate(NetworkSpec{10, 11, 0}), UsageError);
}

TEST(Network, ParameterLayout) {
    auto net = init_network({2, 2, 1});
    Eigen::VectorXd theta(9);
    theta << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    net.set_parameters(theta);
    EXPECT_EQ(net.hidden_weights(0, 1), 2.0);
    EXPECT_EQ(net.hidden_weights(1, 0), 3.0);
    EXPECT_EQ(net.hidden_bias(1), 6.0);
    EXPECT_EQ(net.output_weights(0), 7.0);
    EXPECT_EQ(net.output_bias, 9.0);
    EXPECT_EQ(net.parameters(), theta);
}

TEST(Forward, HandCases) {
    auto net = zero_network(10, 4);
    const std::vector<double> x = {0.3, -0.2, 1, 0, 0, 0, 0, 0, 0, 0.7};
    EXPECT_EQ(forward(net, x), 0.0);
    net.output_bias = 7.0;
    EXPECT_EQ(forward(net, x), 7.0);

    auto one = zero_network(10, 1);
    one.hidden_weights(0, 0) = 1.0;
    one.output_weights(0) = 1.0;
    std::vector<double> half(10, 0.0);
    half[0] = 0.5;
    EXPECT_NEAR(forward(one, half), 0.46211715726, 1e-11);
}

TEST(Gradient, ZeroResidualAndLinearity) {
    Rng rng(1);
    const auto net = init_network({4, 3, 5});
    const auto X = random_matrix(rng, 12, 4);
    const Eigen::VectorXd y = forward(net, X);
    EXPECT_LE(gradient(net, X, y).norm(), 1e-15);

    const auto y2 = random_vector(rng, 12);
    Eigen::MatrixXd XX(24, 4);
    XX << X, X;
    Eigen::VectorXd yy(24);
    yy << y2, y2;
    EXPECT_LE((gradient(net, XX, yy) - 2.0 * gradient(net, X, y2)).norm(), 1e-12);
}

TEST(Gradient, FiniteDifferenceOracle) {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int hidden = 1 + static_cast<int>(rng.below(10));
        const int inputs = 1 + static_cast<int>(rng.below(10));
        const auto net = init_network({inputs, hidden, rng.next()});
        const auto X = random_matrix(rng, 15, inputs);
        const auto y = random_vector(rng, 15);
        const auto g = gradient(net, X, y);
        const auto fd = oracles::fd_gradient(net, X, y);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            EXPECT_LE(std::abs(g(i) - fd(i)), 1e-5 * std::max(1.0, std::abs(fd(i)))) << "param " << i;
        }
    }
}

TEST(Jacobian, ConsistentWithGradientAndSerial) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int hidden = 1 + static_cast<int>(rng.below(10));
        const auto net = init_network({6, hidden, rng.next()});
        const auto X = random_matrix(rng, 25, 6);
        const auto y = random_vector(rng, 25);
        const auto J = jacobian(net, X);
        const Eigen::VectorXd r = forward(net, X) - y;
        EXPECT_LE((J.transpose() * r - gradient(net, X, y)).norm(), 1e-10);
        EXPECT_EQ(J, serial::jacobian(net, X));
    }
    const auto net = init_network({3, 2, 9});
    const auto x1 = random_matrix(rng, 1, 3);
    const auto J1 = jacobian(net, x1);
    EXPECT_EQ(J1.rows(), 1);
    // one row against finite differences of the output
    const auto theta = net.parameters();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        auto up = net, down = net;
        auto tu = theta, td = theta;
        tu(i) += 1e-6;
        td(i) -= 1e-6;
        up.set_parameters(tu);
        down.set_parameters(td);
        const double fd = (forward(up, x1)(0) - forward(down, x1)(0)) / 2e-6;
        EXPECT_LE(std::abs(J1(0, i) - fd), 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST(Jacobian, ParallelMatchesSerialWithThreads) {
    Rng rng(4);
    const auto net = init_network({10, 8, 2});
    const auto X = random_matrix(rng, 3000, 10);
    set_jobs(4);
    const auto J = jacobian(net, X);
    set_jobs(1);
    EXPECT_EQ(J, serial::jacobian(net, X));
}

TEST(Train, AlreadyOptimal) {
    Rng rng(6);
    const auto X = random_matrix(rng, 20, 3);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(20);
    for (auto alg : {Algorithm::Gd, Algorithm::GdMomentum, Algorithm::Rprop, Algorithm::Lm, Algorithm::LmL2}) {
        TrainerSpec t;
        t.algorithm = alg;
        const auto res = train(zero_network(3, 2), X, y, X, y, t);
        EXPECT_EQ(res.history.back().train_mse, 0.0) << algorithm_name(alg);
    }
}

TEST(Train, LmFitsLinearTargetAndNeverIncreasesAcceptedLoss) {
    Rng rng(17);
    const auto X = random_matrix(rng, 60, 2);
    const Eigen::VectorXd y = 0.3 * X.col(0);
    const auto Xv = random_matrix(rng, 20, 2);
    const Eigen::VectorXd yv = 0.3 * Xv.col(0);
    TrainerSpec t;
    t.algorithm = Algorithm::Lm;
    t.max_epochs = 200;
    t.patience = 200;
    const auto res = train(init_network({2, 1, 3}), X, y, Xv, yv, t);
    const double best = (forward(res.net, X) - y).squaredNorm() / 60.0;
    EXPECT_LT(best, 1e-4);
    double prev = res.history.front().train_mse;
    for (const auto& e : res.history) {
        if (e.epoch > 0 && e.step_accepted) {
            EXPECT_LE(e.train_mse, prev);
            prev = e.train_mse;
        }
    }
}

TEST(Train, RpropStepBoundsAndDeterminism) {
    Rng rng(23);
    const auto X = random_matrix(rng, 80, 3);
    Eigen::VectorXd y(80);
    for (int i = 0; i < 80; ++i) y(i) = std::tanh(2 * X(i, 0)) - X(i, 1) * X(i, 2);
    TrainerSpec t;
    t.algorithm = Algorithm::Rprop;
    t.max_epochs = 150;
    t.patience = 150;
    const auto a = train(init_network({3, 6, 1}), X, y, X, y, t);
    for (const auto& e : a.history) {
        if (e.epoch == 0) continue;
        EXPECT_GE(e.step_min, t.rprop.delta_min);
        EXPECT_LE(e.step_max, t.rprop.delta_max);
    }
    const auto b = train(init_network({3, 6, 1}), X, y, X, y, t);
    EXPECT_EQ(a.net.parameters(), b.net.parameters());
    EXPECT_LT(a.history[static_cast<std::size_t>(a.best_epoch)].train_mse, a.history.front().train_mse);
}

TEST(Train, EarlyStoppingReturnsBestValidation) {
    Rng rng(29);
    const auto X = random_matrix(rng, 30, 2);
    const auto y = random_vector(rng, 30);  // pure noise: validation stops improving quickly
    const auto Xv = random_matrix(rng, 30, 2);
    const auto yv = random_vector(rng, 30);
    TrainerSpec t;
    t.algorithm = Algorithm::Lm;
    const auto res = train(init_network({2, 8, 4}), X, y, Xv, yv, t);
    double best = 1e300;
    for (const auto& e : res.history) best = std::min(best, e.val_mse);
    EXPECT_EQ(res.history[static_cast<std::size_t>(res.best_epoch)].val_mse, best);
    EXPECT_NEAR((forward(res.net, Xv) - yv).squaredNorm() / 30.0, best, 1e-12);
    EXPECT_LE(static_cast<int>(res.history.size()) - 1, res.best_epoch + t.patience);
}

TEST(Train, AlgorithmNames) {
    for (auto a : {Algorithm::Gd, Algorithm::GdMomentum, Algorithm::Rprop, Algorithm::Lm, Algorithm::LmL2}) {
        EXPECT_EQ(parse_algorithm(algorithm_name(a)), a);
    }
    EXPECT_THROW(parse_algorithm("trainscg"), UsageError);
}
