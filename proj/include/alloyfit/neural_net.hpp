#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "alloyfit/error.hpp"

namespace alloyfit::nn {

/// One tanh hidden layer, linear output.
struct NetworkSpec {
    int n_inputs = 10;
    int n_hidden = 5;  // 1..10
    std::uint64_t seed = 0;
};

void validate(const NetworkSpec& spec);

struct Network {
    Eigen::MatrixXd hidden_weights;  // n_hidden x n_inputs
    Eigen::VectorXd hidden_bias;     // n_hidden
    Eigen::VectorXd output_weights;  // n_hidden
    double output_bias = 0.0;

    int n_inputs() const noexcept { return static_cast<int>(hidden_weights.cols()); }
    int n_hidden() const noexcept { return static_cast<int>(hidden_weights.rows()); }
    Eigen::Index parameter_count() const noexcept;

    /// Flat layout: hidden weights row-major, hidden biases, output weights, output bias.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);
};

/// Uniform in [-0.5, 0.5] from the seeded generator.
Network init_network(const NetworkSpec& spec);

double forward(const Network& net, std::span<const double> x);
Eigen::VectorXd forward(const Network& net, const Eigen::MatrixXd& X);

/// Backpropagated gradient of 0.5 * sum((f(x_i) - y_i)^2) in the flat layout.
Eigen::VectorXd gradient(const Network& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// d(f(x_i) - y_i)/d(theta), one row per sample. Rows are computed in parallel.
Eigen::MatrixXd jacobian(const Network& net, const Eigen::MatrixXd& X);

namespace serial {
Eigen::MatrixXd jacobian(const Network& net, const Eigen::MatrixXd& X);
}

enum class Algorithm { Gd, GdMomentum, Rprop, Lm, LmL2 };
std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct RpropConstants {
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double delta0 = 0.1;
    double delta_max = 50.0;
    double delta_min = 1e-6;
};

struct TrainerSpec {
    Algorithm algorithm = Algorithm::Lm;
    double learning_rate = 0.05;  // gd, gd_momentum; applied to the mean gradient
    double momentum = 0.9;
    RpropConstants rprop;
    double mu_init = 1e-3;
    double mu_decrease = 0.1;
    double mu_increase = 10.0;
    double mu_max = 1e10;
    double l2 = 0.01;  // lm_l2 penalty on sum(theta^2)
    int max_epochs = 200;
    int patience = 6;
};

void validate(const TrainerSpec& spec);

struct EpochRecord {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    bool step_accepted = true;
    double mu = 0.0;        // lm, lm_l2
    double step_min = 0.0;  // rprop
    double step_max = 0.0;  // rprop
};

struct TrainResult {
    Network net;  // parameters with the lowest recorded validation MSE
    std::vector<EpochRecord> history;
    int best_epoch = 0;
};

class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
        : NumericalError(what), history_(std::move(history)) {}
    const std::vector<EpochRecord>& history() const noexcept { return history_; }

private:
    std::vector<EpochRecord> history_;
};

/// Full-batch training with early stopping on validation MSE. Inputs and
/// targets are expected to be scaled already.
TrainResult train(Network net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
                  const Eigen::VectorXd& y_val, const TrainerSpec& trainer);

/// CSV epoch,train_mse,val_mse,step_accepted
std::string history_csv(std::span<const EpochRecord> history);

}  // namespace alloyfit::nn
