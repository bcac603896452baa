#include "alloyfit/evalstat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "alloyfit/dataset.hpp"
#include "alloyfit/error.hpp"

namespace alloyfit {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b || a == 0) {
        throw UsageError(std::string(what) + ": need equal non-zero lengths, got " + std::to_string(a) + " and " +
                         std::to_string(b));
    }
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double r_square(std::span<const double> targets, std::span<const double> predictions) {
    check_lengths(targets.size(), predictions.size(), "r_square");
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    }
    if (ss_tot == 0.0) throw DataError("r_square undefined: all targets identical");
    return 1.0 - ss_res / ss_tot;
}

double r_square(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions) {
    return r_square(as_span(targets), as_span(predictions));
}

double eqm(std::span<const double> targets, std::span<const double> predictions) {
    check_lengths(targets.size(), predictions.size(), "eqm");
    double ss_res = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    }
    return ss_res / static_cast<double>(targets.size());
}

double eqm(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions) {
    return eqm(as_span(targets), as_span(predictions));
}

namespace {

double finite_mean(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double EvalReport::mean_r2() const { return finite_mean(fold_r2); }

double EvalReport::mean_eqm() const { return finite_mean(fold_eqm); }

std::string format_report(const EvalReport& report) {
    std::string out = "family,property,fold,r2,eqm\n";
    const auto prefix = report.family + ',' + report.property + ',';
    for (int f = 0; f < report.k(); ++f) {
        out += prefix + std::to_string(f + 1) + ',' + format_double(report.fold_r2[static_cast<std::size_t>(f)]) +
               ',' + format_double(report.fold_eqm[static_cast<std::size_t>(f)]) + '\n';
    }
    out += prefix + "mean," + format_double(report.mean_r2()) + ',' + format_double(report.mean_eqm()) + '\n';
    return out;
}

EvalReport parse_report(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t row = 0;
    EvalReport report;
    bool saw_mean = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (row == 1) {
            if (line != "family,property,fold,r2,eqm") throw ParseError(row, "<header>", "not an evaluation report");
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != 5) throw ParseError(row, "<row>", "expected 5 columns");
        if (report.family.empty()) {
            report.family = f[0];
            report.property = f[1];
        } else if (f[0] != report.family || f[1] != report.property) {
            throw ParseError(row, "family", "report mixes families or properties");
        }
        if (f[2] == "mean") {
            saw_mean = true;
            continue;
        }
        if (saw_mean) throw ParseError(row, "fold", "fold row after the mean row");
        try {
            if (std::stoi(f[2]) != report.k() + 1) throw ParseError(row, "fold", "folds must be numbered 1..k in order");
            report.fold_r2.push_back(std::stod(f[3]));
            report.fold_eqm.push_back(std::stod(f[4]));
        } catch (const std::logic_error&) {
            throw ParseError(row, "<row>", "non-numeric field");
        }
    }
    if (report.fold_r2.empty() || !saw_mean) throw DataError("report has no fold rows or no mean row");
    return report;
}

Eigen::MatrixXd block_ranks(const ScoreMatrix& m) {
    const auto n = m.scores.rows();
    const auto k = m.scores.cols();
    Eigen::MatrixXd ranks(n, k);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    for (Eigen::Index b = 0; b < n; ++b) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
            return m.higher_is_better ? m.scores(b, i) > m.scores(b, j) : m.scores(b, i) < m.scores(b, j);
        });
        std::size_t pos = 0;
        while (pos < order.size()) {
            std::size_t end = pos + 1;
            while (end < order.size() && m.scores(b, order[end]) == m.scores(b, order[pos])) ++end;
            // ranks pos+1 .. end share their average
            const double avg = 0.5 * static_cast<double>(pos + 1 + end);
            for (std::size_t q = pos; q < end; ++q) ranks(b, order[q]) = avg;
            pos = end;
        }
    }
    return ranks;
}

double chi_square_sf(double x, int df) {
    if (df < 1) throw UsageError("chi-square needs df >= 1");
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

FriedmanResult friedman(const ScoreMatrix& m) {
    const int n = m.blocks();
    const int k = m.treatments();
    if (n < 2 || k < 2) throw DataError("Friedman test needs at least 2 blocks and 2 treatments");
    if (!m.scores.allFinite()) throw DataError("Friedman test: non-finite score");

    const Eigen::MatrixXd ranks = block_ranks(m);
    FriedmanResult r;
    r.blocks = n;
    r.df = k - 1;
    r.mean_ranks.resize(static_cast<std::size_t>(k));
    const double centre = 0.5 * (k + 1);
    double ss = 0.0;
    for (int j = 0; j < k; ++j) {
        const double mr = ranks.col(j).mean();
        r.mean_ranks[static_cast<std::size_t>(j)] = mr;
        ss += (mr - centre) * (mr - centre);
    }
    r.statistic = 12.0 * n / (static_cast<double>(k) * (k + 1)) * ss;
    r.p_value = chi_square_sf(r.statistic, r.df);
    return r;
}

double bonferroni_critical_difference(int treatments, int blocks, double alpha) {
    if (treatments < 2 || blocks < 1) throw UsageError("critical difference needs k >= 2 and n >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
    const boost::math::normal standard;
    const double z = boost::math::quantile(boost::math::complement(standard, alpha / (2.0 * (treatments - 1))));
    return z * std::sqrt(treatments * (treatments + 1.0) / (6.0 * blocks));
}

std::vector<PairDecision> bonferroni_pairwise(const FriedmanResult& result, int blocks, double alpha) {
    const int k = static_cast<int>(result.mean_ranks.size());
    const double cd = bonferroni_critical_difference(k, blocks, alpha);
    std::vector<PairDecision> out;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double diff = std::abs(result.mean_ranks[static_cast<std::size_t>(i)] -
                                         result.mean_ranks[static_cast<std::size_t>(j)]);
            out.push_back({i, j, diff, cd, diff > cd});
        }
    }
    return out;
}

}  // namespace alloyfit
