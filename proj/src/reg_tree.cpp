#include "alloyfit/reg_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "alloyfit/error.hpp"
#include "alloyfit/evalstat.hpp"
#include "alloyfit/parallel.hpp"

namespace alloyfit::tree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Moments {
    double mean = 0.0;
    double sse = 0.0;
};

Moments moments(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
    Moments m;
    for (auto r : rows) m.mean += y(static_cast<Eigen::Index>(r));
    m.mean /= static_cast<double>(rows.size());
    for (auto r : rows) {
        const double d = y(static_cast<Eigen::Index>(r)) - m.mean;
        m.sse += d * d;
    }
    return m;
}

// Best split on a single feature; targets are centred on the node mean so a
// constant node scores exactly zero.
SplitCandidate scan_feature(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                            std::size_t min_leaf, int feature, double node_mean) {
    std::vector<std::size_t> order(rows.begin(), rows.end());
    const auto f = static_cast<Eigen::Index>(feature);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return X(static_cast<Eigen::Index>(a), f) < X(static_cast<Eigen::Index>(b), f);
    });
    double total = 0.0, total_sq = 0.0;
    for (auto r : order) {
        const double v = y(static_cast<Eigen::Index>(r)) - node_mean;
        total += v;
        total_sq += v * v;
    }
    SplitCandidate best;
    best.children_sse = kInf;
    double left = 0.0, left_sq = 0.0;
    const std::size_t n = order.size();
    for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        const double v = y(static_cast<Eigen::Index>(order[pos])) - node_mean;
        left += v;
        left_sq += v * v;
        const double here = X(static_cast<Eigen::Index>(order[pos]), f);
        const double next = X(static_cast<Eigen::Index>(order[pos + 1]), f);
        if (!(here < next)) continue;
        const std::size_t nl = pos + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double right = total - left, right_sq = total_sq - left_sq;
        const double sse = std::max(0.0, left_sq - left * left / static_cast<double>(nl)) +
                           std::max(0.0, right_sq - right * right / static_cast<double>(nr));
        if (sse < best.children_sse) {
            best.feature = feature;
            best.threshold = 0.5 * (here + next);
            best.children_sse = sse;
        }
    }
    return best;
}

SplitCandidate reduce_candidates(const std::vector<SplitCandidate>& per_feature) {
    SplitCandidate best;
    best.children_sse = kInf;
    for (const auto& c : per_feature) {
        if (c.valid() && c.children_sse < best.children_sse) best = c;
    }
    return best;
}

class Grower {
public:
    Grower(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GrowParams& p) : X_(X), y_(y), p_(p) {}

    int build(std::vector<std::size_t>& rows, int depth) {
        const auto m = moments(y_, rows);
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(Node{-1, 0.0, -1, -1, m.mean, rows.size(), m.sse});
        const bool depth_ok = p_.max_depth < 0 || depth < p_.max_depth;
        if (m.sse <= 0.0 || rows.size() <= p_.min_leaf || !depth_ok) return id;

        const auto split = best_split(X_, y_, rows, p_.min_leaf);
        if (!split.valid()) return id;

        std::vector<std::size_t> left, right;
        const auto f = static_cast<Eigen::Index>(split.feature);
        for (auto r : rows) (X_(static_cast<Eigen::Index>(r), f) <= split.threshold ? left : right).push_back(r);
        const double children = moments(y_, left).sse + moments(y_, right).sse;
        if (!(children < m.sse * (1.0 - 1e-12))) return id;

        rows.clear();
        rows.shrink_to_fit();
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    RegressionTree tree;

private:
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    GrowParams p_;
};

void check_arity(const RegressionTree& tree, std::size_t n) {
    if (static_cast<int>(n) != tree.n_features) {
        throw UsageError("tree expects " + std::to_string(tree.n_features) + " features, got " + std::to_string(n));
    }
}

double r2_from_sse(double sse, double sst) { return 1.0 - sse / sst; }

}  // namespace

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {  // preorder: parents precede children
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

double RegressionTree::training_sse() const {
    double s = 0.0;
    for (const auto& n : nodes) {
        if (n.is_leaf()) s += n.sse;
    }
    return s;
}

SplitCandidate best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                          std::size_t min_leaf) {
    if (rows.size() < 2) return {};
    const double mean = moments(y, rows).mean;
    std::vector<SplitCandidate> per_feature(static_cast<std::size_t>(X.cols()));
    parallel_for_static(per_feature.size(), [&](std::size_t f) {
        per_feature[f] = scan_feature(X, y, rows, min_leaf, static_cast<int>(f), mean);
    }, rows.size() >= 4096 ? 1 : per_feature.size() + 1);
    return reduce_candidates(per_feature);
}

SplitCandidate serial::best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  std::span<const std::size_t> rows, std::size_t min_leaf) {
    if (rows.size() < 2) return {};
    const double mean = moments(y, rows).mean;
    std::vector<SplitCandidate> per_feature;
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        per_feature.push_back(scan_feature(X, y, rows, min_leaf, static_cast<int>(f), mean));
    }
    return reduce_candidates(per_feature);
}

RegressionTree grow(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GrowParams& params) {
    if (X.rows() < 1 || X.rows() != y.size()) throw UsageError("tree growth needs >= 1 sample and matching targets");
    if (params.min_leaf < 1) throw UsageError("min_leaf must be >= 1");
    std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Grower g(X, y, params);
    g.build(rows, 0);
    g.tree.n_features = static_cast<int>(X.cols());
    return std::move(g.tree);
}

double predict(const RegressionTree& tree, std::span<const double> x) {
    check_arity(tree, x.size());
    const Node* node = &tree.nodes.front();
    while (!node->is_leaf()) {
        const auto next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
        node = &tree.nodes[static_cast<std::size_t>(next)];
    }
    return node->value;
}

Eigen::VectorXd predict(const RegressionTree& tree, const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
        out(i) = predict(tree, row);
    }
    return out;
}

PruneSequence prune_sequence(const RegressionTree& tree) {
    PruneSequence seq;
    seq.tree = std::make_shared<const RegressionTree>(tree);
    const auto& nodes = seq.tree->nodes;
    const std::size_t n = nodes.size();
    seq.collapse_alpha.assign(n, kInf);
    std::vector<bool> collapsed(n, false);
    seq.steps.push_back({0.0, tree.leaf_count()});

    std::vector<std::size_t> leaves(n);
    std::vector<double> subtree_sse(n);
    while (!nodes[0].is_leaf() && !collapsed[0]) {
        // children follow parents in preorder, so a reverse sweep is a postorder
        double weakest = kInf;
        std::vector<double> g(n, kInf);
        for (std::size_t i = n; i-- > 0;) {
            if (nodes[i].is_leaf() || collapsed[i]) {
                leaves[i] = 1;
                subtree_sse[i] = nodes[i].sse;
                continue;
            }
            const auto l = static_cast<std::size_t>(nodes[i].left), r = static_cast<std::size_t>(nodes[i].right);
            leaves[i] = leaves[l] + leaves[r];
            subtree_sse[i] = subtree_sse[l] + subtree_sse[r];
            g[i] = (nodes[i].sse - subtree_sse[i]) / static_cast<double>(leaves[i] - 1);
        }
        // only nodes still reachable from the root count
        std::vector<std::size_t> stack{0};
        std::vector<std::size_t> reachable;
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            if (nodes[i].is_leaf() || collapsed[i]) continue;
            reachable.push_back(i);
            weakest = std::min(weakest, g[i]);
            stack.push_back(static_cast<std::size_t>(nodes[i].right));
            stack.push_back(static_cast<std::size_t>(nodes[i].left));
        }
        const double tie = weakest + 1e-12 * std::abs(weakest);
        for (auto i : reachable) {
            if (g[i] <= tie) {
                collapsed[i] = true;
                seq.collapse_alpha[i] = std::max(weakest, seq.steps.back().alpha);
            }
        }
        // leaf count of the new subtree
        std::size_t count = 0;
        stack.assign(1, 0);
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            if (nodes[i].is_leaf() || collapsed[i]) {
                ++count;
                continue;
            }
            stack.push_back(static_cast<std::size_t>(nodes[i].left));
            stack.push_back(static_cast<std::size_t>(nodes[i].right));
        }
        if (weakest <= seq.steps.back().alpha && seq.steps.size() > 1) {
            seq.steps.back().leaves = count;  // numerically tied with the previous step
        } else {
            seq.steps.push_back({weakest, count});
        }
    }
    return seq;
}

double PruneSequence::predict(std::size_t step, std::span<const double> x) const {
    check_arity(*tree, x.size());
    int i = 0;
    while (true) {
        const auto& node = tree->nodes[static_cast<std::size_t>(i)];
        if (node.is_leaf() || collapsed(step, i)) return node.value;
        i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
}

double PruneSequence::training_sse(std::size_t step) const {
    double sse = 0.0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const auto& node = tree->nodes[static_cast<std::size_t>(i)];
        if (node.is_leaf() || collapsed(step, i)) {
            sse += node.sse;
            continue;
        }
        stack.push_back(node.left);
        stack.push_back(node.right);
    }
    return sse;
}

RegressionTree PruneSequence::subtree(std::size_t step) const {
    RegressionTree out;
    out.n_features = tree->n_features;
    // preorder copy with remapped child indices
    auto copy = [&](auto&& self, int i) -> int {
        const auto& src = tree->nodes[static_cast<std::size_t>(i)];
        const int id = static_cast<int>(out.nodes.size());
        Node node = src;
        out.nodes.push_back(node);
        if (src.is_leaf() || collapsed(step, i)) {
            auto& leaf = out.nodes[static_cast<std::size_t>(id)];
            leaf.feature = -1;
            leaf.threshold = 0.0;
            leaf.left = leaf.right = -1;
            return id;
        }
        const int l = self(self, src.left);
        const int r = self(self, src.right);
        out.nodes[static_cast<std::size_t>(id)].left = l;
        out.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    };
    copy(copy, 0);
    return out;
}

namespace {

double step_val_r2(const PruneSequence& seq, std::size_t step, const Eigen::MatrixXd& X_val,
                   const Eigen::VectorXd& y_val) {
    Eigen::VectorXd pred(X_val.rows());
    std::vector<double> row(static_cast<std::size_t>(X_val.cols()));
    for (Eigen::Index i = 0; i < X_val.rows(); ++i) {
        for (Eigen::Index j = 0; j < X_val.cols(); ++j) row[static_cast<std::size_t>(j)] = X_val(i, j);
        pred(i) = seq.predict(step, row);
    }
    return r_square(y_val, pred);
}

}  // namespace

std::vector<double> serial::validation_r2(const PruneSequence& seq, const Eigen::MatrixXd& X_val,
                                          const Eigen::VectorXd& y_val) {
    std::vector<double> out(seq.steps.size());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = step_val_r2(seq, s, X_val, y_val);
    return out;
}

std::vector<double> validation_r2(const PruneSequence& seq, const Eigen::MatrixXd& X_val,
                                  const Eigen::VectorXd& y_val) {
    std::vector<double> out(seq.steps.size());
    parallel_for(out.size(), [&](std::size_t s) { out[s] = step_val_r2(seq, s, X_val, y_val); });
    return out;
}

Selection select_pruned(const PruneSequence& seq, const Eigen::MatrixXd& X_val, const Eigen::VectorXd& y_val,
                        const PrunePolicy& policy) {
    if (seq.steps.empty() || X_val.rows() == 0) throw UsageError("pruning selection needs a sequence and validation data");
    const double sst = seq.tree->nodes.front().sse;
    const auto val = validation_r2(seq, X_val, y_val);
    std::size_t chosen = 0;
    bool within = false;
    if (sst <= 0.0) {
        within = true;
    } else {
        for (std::size_t s = 0; s < seq.steps.size(); ++s) {
            if (std::abs(r2_from_sse(seq.training_sse(s), sst) - val[s]) <= policy.gap_tol) {
                chosen = s;
                within = true;
                break;
            }
        }
        if (!within) chosen = static_cast<std::size_t>(std::max_element(val.begin(), val.end()) - val.begin());
    }
    Selection sel;
    sel.step = chosen;
    sel.tree = seq.subtree(chosen);
    sel.train_r2 = sst > 0.0 ? r2_from_sse(seq.training_sse(chosen), sst) : 1.0;
    sel.val_r2 = val[chosen];
    sel.within_tolerance = within;
    return sel;
}

}  // namespace alloyfit::tree
