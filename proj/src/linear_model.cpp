#include "alloyfit/linear_model.hpp"

#include <cmath>
#include <functional>

#include "alloyfit/error.hpp"
#include "alloyfit/evalstat.hpp"
#include "alloyfit/parallel.hpp"

namespace alloyfit::linear {

namespace {

// Calls emit(indices) for every non-decreasing index tuple of length `len`.
void for_each_monomial(std::size_t n, int len, const std::function<void(const std::vector<std::size_t>&)>& emit) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(len), 0);
    while (true) {
        emit(idx);
        int pos = len - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - 1) --pos;
        if (pos < 0) return;
        const auto next = idx[static_cast<std::size_t>(pos)] + 1;
        for (auto p = static_cast<std::size_t>(pos); p < idx.size(); ++p) idx[p] = next;
    }
}

}  // namespace

void validate(const PolynomialSpec& spec) {
    if (spec.degree < 1 || spec.degree > 3) throw UsageError("polynomial degree must be 1, 2 or 3");
    if (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda)) throw UsageError("ridge lambda must be finite and >= 0");
}

std::size_t basis_size(std::size_t n_features, const PolynomialSpec& spec) {
    if (!spec.interactions) return 1 + n_features * static_cast<std::size_t>(spec.degree);
    // C(n + d, d)
    std::size_t total = 1;
    for (int d = 1; d <= spec.degree; ++d) total = total * (n_features + static_cast<std::size_t>(d)) / static_cast<std::size_t>(d);
    return total;
}

std::vector<double> expand_polynomial(std::span<const double> x, const PolynomialSpec& spec) {
    std::vector<double> out;
    out.reserve(basis_size(x.size(), spec));
    out.push_back(1.0);
    if (!spec.interactions) {
        for (double v : x) {
            double p = 1.0;
            for (int d = 0; d < spec.degree; ++d) {
                p *= v;
                out.push_back(p);
            }
        }
        return out;
    }
    if (x.empty()) return out;
    for (int d = 1; d <= spec.degree; ++d) {
        for_each_monomial(x.size(), d, [&](const std::vector<std::size_t>& idx) {
            double p = 1.0;
            for (auto i : idx) p *= x[i];
            out.push_back(p);
        });
    }
    return out;
}

Eigen::MatrixXd expand_rows(const Eigen::MatrixXd& X, const PolynomialSpec& spec) {
    const auto width = basis_size(static_cast<std::size_t>(X.cols()), spec);
    Eigen::MatrixXd B(X.rows(), static_cast<Eigen::Index>(width));
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
        const auto b = expand_polynomial(row, spec);
        for (std::size_t j = 0; j < width; ++j) B(i, static_cast<Eigen::Index>(j)) = b[j];
    }
    return B;
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, double lambda,
                          RidgeOptions options) {
    if (basis.rows() != y.size() || basis.rows() < 1) {
        throw UsageError("ridge: basis has " + std::to_string(basis.rows()) + " rows but " +
                         std::to_string(y.size()) + " targets");
    }
    Eigen::MatrixXd A = basis.transpose() * basis;
    const Eigen::VectorXd rhs = basis.transpose() * y;
    for (Eigen::Index j = options.unpenalized_bias ? 1 : 0; j < A.rows(); ++j) A(j, j) += lambda;

    constexpr double kMinRcond = 1e-15;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success && llt.rcond() > kMinRcond) return llt.solve(rhs);

    const double jitter = 1e-10 * A.trace() / static_cast<double>(A.rows());
    A.diagonal().array() += jitter;
    llt.compute(A);
    if (llt.info() == Eigen::Success && llt.rcond() > kMinRcond) return llt.solve(rhs);

    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    throw NumericalError("ridge normal equations singular after jitter (reciprocal condition estimate " +
                         std::to_string(rcond) + ")");
}

LinearModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const PolynomialSpec& spec,
                       bool scale_inputs) {
    validate(spec);
    LinearModel model{.spec = spec, .weights = {}, .scaler = std::nullopt,
                      .arity = static_cast<std::size_t>(X.cols())};
    if (scale_inputs) {
        model.scaler = fit_scaler(X, Eigen::VectorXd{});
        model.weights = fit_ridge(expand_rows(scale_features(*model.scaler, X), spec), y, spec.lambda);
    } else {
        model.weights = fit_ridge(expand_rows(X, spec), y, spec.lambda);
    }
    if (!model.weights.allFinite()) throw NumericalError("ridge produced non-finite weights");
    return model;
}

double predict(const LinearModel& model, std::span<const double> x) {
    if (x.size() != model.arity) {
        throw UsageError("linear predict: expected " + std::to_string(model.arity) + " features, got " +
                         std::to_string(x.size()));
    }
    const auto basis = model.scaler ? expand_polynomial(model.scaler->transform(x), model.spec)
                                    : expand_polynomial(x, model.spec);
    double sum = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j) sum += model.weights(static_cast<Eigen::Index>(j)) * basis[j];
    return sum;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X) {
    if (static_cast<std::size_t>(X.cols()) != model.arity) throw UsageError("linear predict: arity mismatch");
    const Eigen::MatrixXd B = model.scaler ? expand_rows(scale_features(*model.scaler, X), model.spec)
                                           : expand_rows(X, model.spec);
    return B * model.weights;
}

std::string CurveTable::to_csv() const {
    std::string out = "degree,lambda,train_r2,val_r2\n";
    for (const auto& r : rows) {
        out += std::to_string(r.degree) + ',' + format_double(r.lambda) + ',' + format_double(r.train_r2) + ',' +
               format_double(r.val_r2) + '\n';
    }
    return out;
}

CurveTable sweep(std::span<const Sample> samples, const FoldAssignment& folds, std::span<const int> degrees,
                 std::span<const double> lambdas, bool interactions) {
    if (degrees.empty() || lambdas.empty()) throw UsageError("linear sweep needs non-empty degree and lambda grids");
    const auto n_cells = degrees.size() * lambdas.size();
    const auto k = static_cast<std::size_t>(folds.k);
    std::vector<double> train_r2(n_cells * k), val_r2(n_cells * k);

    parallel_for(n_cells * k, [&](std::size_t t) {
        const auto cell = t / k;
        const auto fold = static_cast<int>(t % k);
        const PolynomialSpec spec{degrees[cell / lambdas.size()], interactions, lambdas[cell % lambdas.size()]};
        const auto tr = folds.train_indices(fold);
        const auto va = folds.val_indices(fold);
        const Eigen::VectorXd ytr = target_vector(samples, tr);
        const Eigen::VectorXd yva = target_vector(samples, va);
        const auto model = fit_linear(feature_matrix(samples, tr), ytr, spec);
        train_r2[t] = r_square(ytr, predict(model, feature_matrix(samples, tr)));
        val_r2[t] = r_square(yva, predict(model, feature_matrix(samples, va)));
    });

    CurveTable table;
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        CurveRow row{degrees[cell / lambdas.size()], lambdas[cell % lambdas.size()], 0.0, 0.0};
        for (std::size_t f = 0; f < k; ++f) {
            row.train_r2 += train_r2[cell * k + f];
            row.val_r2 += val_r2[cell * k + f];
        }
        row.train_r2 /= static_cast<double>(k);
        row.val_r2 /= static_cast<double>(k);
        if (row.val_r2 > (table.rows.empty() ? -INFINITY : table.rows[table.best].val_r2)) table.best = cell;
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace alloyfit::linear
