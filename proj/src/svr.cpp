#include "alloyfit/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>

#include "alloyfit/error.hpp"
#include "alloyfit/parallel.hpp"

namespace alloyfit::svr {

namespace {

double kernel_rows(const KernelSpec& spec, const Eigen::MatrixXd& A, Eigen::Index i, const Eigen::MatrixXd& B,
                   Eigen::Index j) {
    switch (spec.kind) {
        case KernelKind::Linear: return A.row(i).dot(B.row(j));
        case KernelKind::Polynomial: return std::pow(A.row(i).dot(B.row(j)) + spec.coef0, spec.degree);
        case KernelKind::Gaussian: return std::exp(-spec.gamma * (A.row(i) - B.row(j)).squaredNorm());
    }
    return 0.0;
}

// LRU cache of kernel rows K(i, .) over the training set.
class KernelCache {
public:
    KernelCache(const KernelSpec& spec, const Eigen::MatrixXd& X, double cache_mb)
        : spec_(spec), X_(X), n_(static_cast<std::size_t>(X.rows())), slot_of_(n_, npos) {
        const double bytes = std::max(cache_mb, 0.0) * 1024.0 * 1024.0;
        capacity_ = std::clamp<std::size_t>(static_cast<std::size_t>(bytes / (8.0 * static_cast<double>(n_))),
                                            2, n_);
    }

    const double* row(std::size_t i) {
        if (slot_of_[i] != npos) {
            auto& slot = slots_[slot_of_[i]];
            lru_.splice(lru_.begin(), lru_, slot.pos);
            return slot.data.data();
        }
        std::size_t s;
        if (slots_.size() < capacity_) {
            s = slots_.size();
            slots_.push_back({std::vector<double>(n_), {}, i});
        } else {
            s = lru_.back();
            lru_.pop_back();
            slot_of_[slots_[s].owner] = npos;
            slots_[s].owner = i;
        }
        lru_.push_front(s);
        slots_[s].pos = lru_.begin();
        slot_of_[i] = s;
        auto& data = slots_[s].data;
        const auto ii = static_cast<Eigen::Index>(i);
        parallel_for_static(n_, [&](std::size_t j) {
            data[j] = kernel_rows(spec_, X_, ii, X_, static_cast<Eigen::Index>(j));
        }, 2048);
        return data.data();
    }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    struct Slot {
        std::vector<double> data;
        std::list<std::size_t>::iterator pos;
        std::size_t owner;
    };

    const KernelSpec& spec_;
    const Eigen::MatrixXd& X_;
    std::size_t n_;
    std::size_t capacity_ = 2;
    std::vector<std::size_t> slot_of_;
    std::vector<Slot> slots_;
    std::list<std::size_t> lru_;
};

}  // namespace

std::string_view kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Polynomial: return "polynomial";
        case KernelKind::Gaussian: return "gaussian";
    }
    return "?";
}

KernelKind parse_kernel(std::string_view name) {
    if (name == "linear") return KernelKind::Linear;
    if (name == "polynomial" || name == "poly") return KernelKind::Polynomial;
    if (name == "gaussian" || name == "rbf") return KernelKind::Gaussian;
    throw UsageError("unknown kernel '" + std::string(name) + "' (expected linear|polynomial|gaussian)");
}

void validate(const KernelSpec& spec) {
    if (!(spec.gamma > 0.0)) throw UsageError("kernel gamma must be > 0");
    if (spec.degree < 1) throw UsageError("polynomial degree must be >= 1");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
    if (x.size() != z.size()) {
        throw UsageError("kernel arity mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(z.size()));
    }
    double dot = 0.0;
    double dist = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * z[i];
        dist += (x[i] - z[i]) * (x[i] - z[i]);
    }
    switch (spec.kind) {
        case KernelKind::Linear: return dot;
        case KernelKind::Polynomial: return std::pow(dot + spec.coef0, spec.degree);
        case KernelKind::Gaussian: return std::exp(-spec.gamma * dist);
    }
    return 0.0;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
    const auto n = X.rows();
    Eigen::MatrixXd K(n, n);
    parallel_for_static(static_cast<std::size_t>(n), [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < n; ++j) K(ii, j) = kernel_rows(spec, X, ii, X, j);
    }, 64);
    return K;
}

Eigen::MatrixXd serial::kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
    const auto n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) K(i, j) = kernel_rows(spec, X, i, X, j);
    }
    return K;
}

double default_gamma(const Eigen::MatrixXd& X) {
    if (X.size() == 0) return 1.0;
    const double mean = X.mean();
    const double var = (X.array() - mean).square().mean();
    return var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
}

void validate(const SvrParams& p) {
    if (!(p.C > 0.0)) throw UsageError("SVR box constraint C must be > 0");
    if (!(p.epsilon >= 0.0)) throw UsageError("SVR epsilon must be >= 0");
    if (!(p.tolerance > 0.0)) throw UsageError("SVR tolerance must be > 0");
    if (p.max_passes < 1) throw UsageError("SVR max_passes must be >= 1");
}

SvrModel fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& kernel,
                 const SvrParams& params) {
    validate(kernel);
    validate(params);
    if (X.rows() < 2) throw DataError("SVR needs at least 2 samples");
    if (X.rows() != y.size()) throw UsageError("SVR: feature/target row mismatch");

    const auto n = static_cast<std::size_t>(X.rows());
    const std::size_t m = 2 * n;  // alpha_i for s < n, alpha*_i for s >= n
    const double C = params.C;
    auto sign = [n](std::size_t s) { return s < n ? 1.0 : -1.0; };
    auto sample = [n](std::size_t s) { return s < n ? s : s - n; };

    KernelCache cache(kernel, X, params.cache_mb);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = kernel_rows(kernel, X, static_cast<Eigen::Index>(i), X, static_cast<Eigen::Index>(i));
    }

    std::vector<double> alpha(m, 0.0);
    std::vector<double> grad(m);
    for (std::size_t i = 0; i < n; ++i) {
        grad[i] = params.epsilon - y(static_cast<Eigen::Index>(i));
        grad[i + n] = params.epsilon + y(static_cast<Eigen::Index>(i));
    }
    auto in_up = [&](std::size_t s) { return s < n ? alpha[s] < C : alpha[s] > 0.0; };
    auto in_low = [&](std::size_t s) { return s < n ? alpha[s] > 0.0 : alpha[s] < C; };

    constexpr double kTau = 1e-12;
    const long max_iter = static_cast<long>(params.max_passes) * static_cast<long>(m);
    SvrModel model;
    model.kernel = kernel;
    model.C = C;
    model.epsilon = params.epsilon;
    model.status = FitStatus::IterationLimit;

    double up_max = 0.0;
    double low_min = 0.0;
    long iter = 0;
    for (;; ++iter) {
        // maximal violating pair
        std::size_t i = m, j = m;
        up_max = -std::numeric_limits<double>::infinity();
        low_min = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < m; ++s) {
            const double v = -sign(s) * grad[s];
            if (in_up(s) && v > up_max) {
                up_max = v;
                i = s;
            }
            if (in_low(s) && v < low_min) {
                low_min = v;
                j = s;
            }
        }
        if (i == m || j == m || up_max - low_min <= params.tolerance) {
            model.status = FitStatus::Converged;
            break;
        }
        if (iter >= max_iter) break;

        const double* Ki = cache.row(sample(i));
        const double* Kj = cache.row(sample(j));
        const double yi = sign(i), yj = sign(j);
        const double Qij = yi * yj * Ki[sample(j)];
        const double Qii = diag[sample(i)], Qjj = diag[sample(j)];
        const double old_i = alpha[i], old_j = alpha[j];

        if (yi != yj) {
            double quad = Qii + Qjj + 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
            }
            if (diff > 0.0) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
            } else {
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
            }
        } else {
            double quad = Qii + Qjj - 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
            } else {
                if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
            }
            if (sum > C) {
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
            } else {
                if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
            }
        }

        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < m; ++t) {
            const double yt = sign(t);
            const auto st = sample(t);
            grad[t] += yt * (yi * Ki[st] * di + yj * Kj[st] * dj);
        }
    }
    model.iterations = iter;
    model.final_gap = std::max(0.0, up_max - low_min);

    // bias from free variables, else the midpoint of the feasible interval
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t s = 0; s < m; ++s) {
        if (alpha[s] > 0.0 && alpha[s] < C) {
            free_sum += -sign(s) * grad[s];
            ++free_count;
        }
    }
    if (free_count > 0) {
        model.bias = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(up_max) && std::isfinite(low_min)) {
        model.bias = 0.5 * (up_max + low_min);
    } else {
        model.bias = std::isfinite(up_max) ? up_max : low_min;
    }

    std::vector<Eigen::Index> support;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] - alpha[i + n] != 0.0) support.push_back(static_cast<Eigen::Index>(i));
    }
    model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), X.cols());
    model.coefficients.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t r = 0; r < support.size(); ++r) {
        const auto i = static_cast<std::size_t>(support[r]);
        model.support_vectors.row(static_cast<Eigen::Index>(r)) = X.row(support[r]);
        model.coefficients(static_cast<Eigen::Index>(r)) = alpha[i] - alpha[i + n];
        model.support_indices.push_back(i);
    }
    return model;
}

double decision(const SvrModel& model, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != model.support_vectors.cols() && model.support_vectors.rows() > 0) {
        throw UsageError("SVR arity mismatch: expected " + std::to_string(model.support_vectors.cols()) +
                         ", got " + std::to_string(x.size()));
    }
    const Eigen::Map<const Eigen::RowVectorXd> z(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::MatrixXd zm = z;
    double sum = model.bias;
    for (Eigen::Index r = 0; r < model.support_vectors.rows(); ++r) {
        sum += model.coefficients(r) * kernel_rows(model.kernel, model.support_vectors, r, zm, 0);
    }
    return sum;
}

double predict(const SvrModel& model, std::span<const double> x) {
    if (!model.scaler) return decision(model, x);
    const auto xs = model.scaler->transform(x);
    return model.scaler->unscale_target(decision(model, xs));
}

Eigen::VectorXd predict(const SvrModel& model, const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
        out(i) = predict(model, row);
    }
    return out;
}

Eigen::VectorXd dense_coefficients(const SvrModel& model, Eigen::Index n) {
    if (model.support_indices.size() != static_cast<std::size_t>(model.coefficients.size())) {
        throw UsageError("SVR model carries no training indices");
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    for (std::size_t r = 0; r < model.support_indices.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(model.support_indices[r]);
        if (i >= n) throw UsageError("SVR support index outside the given data");
        beta(i) = model.coefficients(static_cast<Eigen::Index>(r));
    }
    return beta;
}

double kkt_violation(const SvrModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::VectorXd beta = dense_coefficients(model, X.rows());
    const double C = model.C;
    const double eps = model.epsilon;
    const double bound_tol = 1e-12 * C;
    double worst = 0.0;
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
        const double e = y(i) - decision(model, row);
        const double b = beta(i);
        double v;
        if (std::abs(b) <= bound_tol) {
            v = std::max(0.0, std::abs(e) - eps);
        } else if (b >= C - bound_tol) {
            v = std::max(0.0, eps - e);
        } else if (b <= -C + bound_tol) {
            v = std::max(0.0, e + eps);
        } else if (b > 0.0) {
            v = std::abs(e - eps);
        } else {
            v = std::abs(e + eps);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace alloyfit::svr
