#include "alloyfit/neural_net.hpp"

#include <algorithm>
#include <cmath>

#include "alloyfit/dataset.hpp"
#include "alloyfit/parallel.hpp"
#include "alloyfit/rng.hpp"

namespace alloyfit::nn {

namespace {

void check_arity(const Network& net, Eigen::Index cols) {
    if (cols != net.n_inputs()) {
        throw UsageError("network expects " + std::to_string(net.n_inputs()) + " inputs, got " + std::to_string(cols));
    }
}

// Jacobian row for one sample, written into row i of J.
void jacobian_row(const Network& net, const Eigen::MatrixXd& X, Eigen::Index i, Eigen::MatrixXd& J) {
    const auto h = net.n_hidden();
    const auto d = net.n_inputs();
    for (Eigen::Index j = 0; j < h; ++j) {
        const double a = std::tanh(net.hidden_weights.row(j).dot(X.row(i)) + net.hidden_bias(j));
        const double back = net.output_weights(j) * (1.0 - a * a);
        for (Eigen::Index q = 0; q < d; ++q) J(i, j * d + q) = back * X(i, q);
        J(i, h * d + j) = back;
        J(i, h * d + h + j) = a;
    }
    J(i, h * d + 2 * h) = 1.0;
}

double mse(const Network& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return (forward(net, X) - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

void validate(const NetworkSpec& spec) {
    if (spec.n_hidden < 1 || spec.n_hidden > 10) throw UsageError("hidden units must lie in 1..10");
    if (spec.n_inputs < 1) throw UsageError("network needs at least one input");
}

Eigen::Index Network::parameter_count() const noexcept {
    return hidden_weights.size() + hidden_bias.size() + output_weights.size() + 1;
}

Eigen::VectorXd Network::parameters() const {
    Eigen::VectorXd theta(parameter_count());
    Eigen::Index p = 0;
    for (Eigen::Index j = 0; j < hidden_weights.rows(); ++j) {
        for (Eigen::Index q = 0; q < hidden_weights.cols(); ++q) theta(p++) = hidden_weights(j, q);
    }
    for (Eigen::Index j = 0; j < hidden_bias.size(); ++j) theta(p++) = hidden_bias(j);
    for (Eigen::Index j = 0; j < output_weights.size(); ++j) theta(p++) = output_weights(j);
    theta(p) = output_bias;
    return theta;
}

void Network::set_parameters(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count()) throw UsageError("parameter vector has the wrong length");
    Eigen::Index p = 0;
    for (Eigen::Index j = 0; j < hidden_weights.rows(); ++j) {
        for (Eigen::Index q = 0; q < hidden_weights.cols(); ++q) hidden_weights(j, q) = theta(p++);
    }
    for (Eigen::Index j = 0; j < hidden_bias.size(); ++j) hidden_bias(j) = theta(p++);
    for (Eigen::Index j = 0; j < output_weights.size(); ++j) output_weights(j) = theta(p++);
    output_bias = theta(p);
}

Network init_network(const NetworkSpec& spec) {
    validate(spec);
    Network net{Eigen::MatrixXd(spec.n_hidden, spec.n_inputs), Eigen::VectorXd(spec.n_hidden),
                Eigen::VectorXd(spec.n_hidden), 0.0};
    Rng rng(spec.seed);
    Eigen::VectorXd theta(net.parameter_count());
    for (Eigen::Index p = 0; p < theta.size(); ++p) theta(p) = rng.uniform(-0.5, 0.5);
    net.set_parameters(theta);
    return net;
}

double forward(const Network& net, std::span<const double> x) {
    check_arity(net, static_cast<Eigen::Index>(x.size()));
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return net.output_bias + net.output_weights.dot((net.hidden_weights * v + net.hidden_bias).array().tanh().matrix());
}

Eigen::VectorXd forward(const Network& net, const Eigen::MatrixXd& X) {
    check_arity(net, X.cols());
    const Eigen::MatrixXd H = ((X * net.hidden_weights.transpose()).rowwise() + net.hidden_bias.transpose()).array().tanh();
    return (H * net.output_weights).array() + net.output_bias;
}

Eigen::VectorXd gradient(const Network& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_arity(net, X.cols());
    const Eigen::MatrixXd H = ((X * net.hidden_weights.transpose()).rowwise() + net.hidden_bias.transpose()).array().tanh();
    const Eigen::VectorXd r = (H * net.output_weights).array() + net.output_bias - y.array();
    // delta(i, j) = r_i * w_j * (1 - a_ij^2)
    const Eigen::MatrixXd delta =
        ((r * net.output_weights.transpose()).array() * (1.0 - H.array().square())).matrix();

    Network g = net;
    g.hidden_weights = delta.transpose() * X;
    g.hidden_bias = delta.colwise().sum().transpose();
    g.output_weights = H.transpose() * r;
    g.output_bias = r.sum();
    return g.parameters();
}

Eigen::MatrixXd jacobian(const Network& net, const Eigen::MatrixXd& X) {
    check_arity(net, X.cols());
    Eigen::MatrixXd J(X.rows(), net.parameter_count());
    parallel_for_static(static_cast<std::size_t>(X.rows()),
                        [&](std::size_t i) { jacobian_row(net, X, static_cast<Eigen::Index>(i), J); });
    return J;
}

Eigen::MatrixXd serial::jacobian(const Network& net, const Eigen::MatrixXd& X) {
    check_arity(net, X.cols());
    Eigen::MatrixXd J(X.rows(), net.parameter_count());
    for (Eigen::Index i = 0; i < X.rows(); ++i) jacobian_row(net, X, i, J);
    return J;
}

std::string_view algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Gd: return "gd";
        case Algorithm::GdMomentum: return "gd_momentum";
        case Algorithm::Rprop: return "rprop";
        case Algorithm::Lm: return "lm";
        case Algorithm::LmL2: return "lm_l2";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view name) {
    for (auto a : {Algorithm::Gd, Algorithm::GdMomentum, Algorithm::Rprop, Algorithm::Lm, Algorithm::LmL2}) {
        if (algorithm_name(a) == name) return a;
    }
    throw UsageError("unknown trainer '" + std::string(name) + "' (expected gd|gd_momentum|rprop|lm|lm_l2)");
}

void validate(const TrainerSpec& t) {
    const bool ok = t.learning_rate > 0 && t.momentum >= 0 && t.momentum < 1 && t.rprop.eta_plus > 1 &&
                    t.rprop.eta_minus > 0 && t.rprop.eta_minus < 1 && t.rprop.delta_min > 0 &&
                    t.rprop.delta_max >= t.rprop.delta_min && t.rprop.delta0 >= t.rprop.delta_min &&
                    t.rprop.delta0 <= t.rprop.delta_max && t.mu_init > 0 && t.mu_decrease > 0 &&
                    t.mu_decrease < 1 && t.mu_increase > 1 && t.mu_max > t.mu_init && t.l2 >= 0 &&
                    t.max_epochs >= 1 && t.patience >= 1;
    if (!ok) throw UsageError("invalid trainer hyperparameters");
}

TrainResult train(Network net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
                  const Eigen::VectorXd& y_val, const TrainerSpec& trainer) {
    validate(trainer);
    if (X.rows() == 0 || X_val.rows() == 0) throw UsageError("training and validation sets must be non-empty");
    if (X.rows() != y.size() || X_val.rows() != y_val.size()) throw UsageError("feature/target row mismatch");
    check_arity(net, X.cols());
    check_arity(net, X_val.cols());

    const auto n_params = net.parameter_count();
    const double n = static_cast<double>(X.rows());
    const bool is_lm = trainer.algorithm == Algorithm::Lm || trainer.algorithm == Algorithm::LmL2;
    const double l2 = trainer.algorithm == Algorithm::LmL2 ? trainer.l2 : 0.0;

    TrainResult result{net, {}, 0};
    Eigen::VectorXd theta = net.parameters();
    double train_mse = mse(net, X, y);
    double best_val = mse(net, X_val, y_val);
    result.history.push_back({0, train_mse, best_val, true, is_lm ? trainer.mu_init : 0.0,
                              trainer.rprop.delta0, trainer.rprop.delta0});
    if (!std::isfinite(train_mse) || !std::isfinite(best_val)) {
        throw TrainingDiverged("non-finite loss at initialization", result.history);
    }

    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(n_params);
    Eigen::VectorXd step_size = Eigen::VectorXd::Constant(n_params, trainer.rprop.delta0);
    Eigen::VectorXd prev_grad = Eigen::VectorXd::Zero(n_params);
    double mu = trainer.mu_init;
    auto objective = [&](const Eigen::VectorXd& r, const Eigen::VectorXd& th) {
        return r.squaredNorm() + l2 * th.squaredNorm();
    };

    int stale = 0;
    for (int epoch = 1; epoch <= trainer.max_epochs && train_mse > 0.0; ++epoch) {
        bool accepted = true;
        switch (trainer.algorithm) {
            case Algorithm::Gd:
                theta -= trainer.learning_rate / n * gradient(net, X, y);
                break;
            case Algorithm::GdMomentum:
                velocity = trainer.momentum * velocity - trainer.learning_rate / n * gradient(net, X, y);
                theta += velocity;
                break;
            case Algorithm::Rprop: {
                const auto& rp = trainer.rprop;
                Eigen::VectorXd g = gradient(net, X, y);
                for (Eigen::Index p = 0; p < n_params; ++p) {
                    const double s = g(p) * prev_grad(p);
                    if (s > 0.0) {
                        step_size(p) = std::min(step_size(p) * rp.eta_plus, rp.delta_max);
                    } else if (s < 0.0) {
                        step_size(p) = std::max(step_size(p) * rp.eta_minus, rp.delta_min);
                        g(p) = 0.0;
                    }
                    if (g(p) > 0.0) theta(p) -= step_size(p);
                    else if (g(p) < 0.0) theta(p) += step_size(p);
                }
                prev_grad = g;
                break;
            }
            case Algorithm::Lm:
            case Algorithm::LmL2: {
                const Eigen::MatrixXd J = jacobian(net, X);
                const Eigen::VectorXd r = forward(net, X) - y;
                const double current = objective(r, theta);
                Eigen::MatrixXd JtJ = Eigen::MatrixXd::Zero(n_params, n_params);
                JtJ.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
                JtJ = JtJ.selfadjointView<Eigen::Lower>();
                JtJ.diagonal().array() += l2;
                const Eigen::VectorXd g = J.transpose() * r + l2 * theta;
                accepted = false;
                while (mu <= trainer.mu_max) {
                    Eigen::MatrixXd A = JtJ;
                    A.diagonal().array() += mu;
                    const Eigen::LLT<Eigen::MatrixXd> llt(A);
                    if (llt.info() == Eigen::Success) {
                        const Eigen::VectorXd candidate = theta - llt.solve(g);
                        Network trial = net;
                        trial.set_parameters(candidate);
                        const double value = objective(forward(trial, X) - y, candidate);
                        if (std::isfinite(value) && value < current) {
                            theta = candidate;
                            mu *= trainer.mu_decrease;
                            accepted = true;
                            break;
                        }
                    }
                    mu *= trainer.mu_increase;
                }
                break;
            }
        }
        net.set_parameters(theta);
        train_mse = mse(net, X, y);
        const double val_mse = mse(net, X_val, y_val);
        result.history.push_back({epoch, train_mse, val_mse, accepted, is_lm ? mu : 0.0, step_size.minCoeff(),
                                  step_size.maxCoeff()});
        if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
            throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch), result.history);
        }
        if (val_mse < best_val) {
            best_val = val_mse;
            result.net = net;
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= trainer.patience) {
            break;
        }
        if (!accepted) break;  // damping exhausted
    }
    return result;
}

std::string history_csv(std::span<const EpochRecord> history) {
    std::string out = "epoch,train_mse,val_mse,step_accepted\n";
    for (const auto& h : history) {
        out += std::to_string(h.epoch) + ',' + format_double(h.train_mse) + ',' + format_double(h.val_mse) + ',' +
               (h.step_accepted ? "1" : "0") + '\n';
    }
    return out;
}

}  // namespace alloyfit::nn
