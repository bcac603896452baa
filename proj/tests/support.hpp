#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "alloyfit/dataset.hpp"
#include "alloyfit/rng.hpp"

namespace testing_support {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline Eigen::MatrixXd random_matrix(alloyfit::Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
    }
    return m;
}

inline Eigen::VectorXd random_vector(alloyfit::Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

inline std::vector<double> row(const Eigen::MatrixXd& X, Eigen::Index i) {
    std::vector<double> r(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) r[static_cast<std::size_t>(j)] = X(i, j);
    return r;
}

inline alloyfit::AlloyRecord fixed_record(std::string id, int route = 1) {
    alloyfit::AlloyRecord r;
    r.record_id = std::move(id);
    r.composition[0] = {80.0, 80.0};
    r.composition[1] = {0.5, 0.5};
    r.composition[2] = {1.0, 1.0};
    r.process = alloyfit::ProcessRoute(route);
    r.targets = {200.0, 600.0, 400.0, 20.0};
    return r;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("alloyfit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
