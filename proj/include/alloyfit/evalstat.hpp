#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace alloyfit {

// ---------------------------------------------------------------------------
// Metrics

/// 1 - SQres/SQtot. Negative for fits worse than the mean. Throws DataError
/// when all targets are identical.
double r_square(std::span<const double> targets, std::span<const double> predictions);
double r_square(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions);

/// Mean squared error, SQres/n.
double eqm(std::span<const double> targets, std::span<const double> predictions);
double eqm(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions);

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
    std::string family;
    std::string property;
    std::vector<double> fold_r2;
    std::vector<double> fold_eqm;

    int k() const noexcept { return static_cast<int>(fold_r2.size()); }
    /// Means skip non-finite entries (folds whose fit failed).
    double mean_r2() const;
    double mean_eqm() const;
};

/// CSV with columns family,property,fold,r2,eqm; folds 1..k then a "mean" row.
std::string format_report(const EvalReport& report);
EvalReport parse_report(std::string_view text);

// ---------------------------------------------------------------------------
// Rank statistics

/// Blocks (folds) in rows, treatments (models) in columns.
struct ScoreMatrix {
    Eigen::MatrixXd scores;
    bool higher_is_better = true;
    std::vector<std::string> labels;

    int blocks() const noexcept { return static_cast<int>(scores.rows()); }
    int treatments() const noexcept { return static_cast<int>(scores.cols()); }
};

struct FriedmanResult {
    std::vector<double> mean_ranks;  // rank 1 = best
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    int blocks = 0;
};

/// Ranks within each block, 1 = best, ties receive the average rank.
Eigen::MatrixXd block_ranks(const ScoreMatrix& scores);

FriedmanResult friedman(const ScoreMatrix& scores);

struct PairDecision {
    int first = 0;
    int second = 0;
    double rank_difference = 0.0;
    double critical_difference = 0.0;
    bool significant = false;
};

/// Bonferroni-Dunn critical difference z(1 - alpha / (2 (k - 1))) * sqrt(k (k + 1) / (6 n)).
double bonferroni_critical_difference(int treatments, int blocks, double alpha);

std::vector<PairDecision> bonferroni_pairwise(const FriedmanResult& result, int blocks, double alpha = 0.05);

/// Upper-tail chi-square probability.
double chi_square_sf(double x, int df);

}  // namespace alloyfit
