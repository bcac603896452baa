#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace alloyfit::tree {

/// Nodes live in a flat preorder array; children are indices into it.
struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean of the training targets routed here
    std::size_t count = 0;
    double sse = 0.0;  // training SSE of this node treated as a leaf

    bool is_leaf() const noexcept { return left < 0; }
};

struct RegressionTree {
    std::vector<Node> nodes;  // nodes[0] is the root
    int n_features = 0;

    std::size_t leaf_count() const;
    int depth() const;
    double training_sse() const;  // sum of leaf SSEs
};

struct GrowParams {
    std::size_t min_leaf = 1;
    int max_depth = -1;  // unlimited
};

struct SplitCandidate {
    int feature = -1;
    double threshold = 0.0;
    double children_sse = 0.0;

    bool valid() const noexcept { return feature >= 0; }
};

/// Best SSE split of `rows` over all features (midpoints of consecutive
/// distinct values; ties go to the lower feature index, then the lower
/// threshold). Features are scanned in parallel for large nodes.
SplitCandidate best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                          std::size_t min_leaf);

namespace serial {
SplitCandidate best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                          std::size_t min_leaf);
}

/// Greedy CART growth until no split lowers the SSE or nodes reach min_leaf.
RegressionTree grow(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GrowParams& params = {});

double predict(const RegressionTree& tree, std::span<const double> x);
Eigen::VectorXd predict(const RegressionTree& tree, const Eigen::MatrixXd& X);

struct PruneStep {
    double alpha = 0.0;
    std::size_t leaves = 0;
};

/// Weakest-link cost-complexity sequence. Step 0 is the full tree at
/// alpha 0; the last step is the root-only stump. Node statistics recorded
/// during growth stand in for the training data.
struct PruneSequence {
    std::shared_ptr<const RegressionTree> tree;
    std::vector<double> collapse_alpha;  // per node; +inf if never collapsed directly
    std::vector<PruneStep> steps;

    bool collapsed(std::size_t step, int node) const {
        return collapse_alpha[static_cast<std::size_t>(node)] <= steps[step].alpha;
    }
    double predict(std::size_t step, std::span<const double> x) const;
    double training_sse(std::size_t step) const;
    /// Materializes the pruned tree as a compact preorder array.
    RegressionTree subtree(std::size_t step) const;
};

PruneSequence prune_sequence(const RegressionTree& tree);

namespace serial {
std::vector<double> validation_r2(const PruneSequence& seq, const Eigen::MatrixXd& X_val, const Eigen::VectorXd& y_val);
}
/// Validation R2 of every step, steps scored in parallel.
std::vector<double> validation_r2(const PruneSequence& seq, const Eigen::MatrixXd& X_val, const Eigen::VectorXd& y_val);

struct PrunePolicy {
    double gap_tol = 0.05;
};

struct Selection {
    std::size_t step = 0;
    RegressionTree tree;
    double train_r2 = 0.0;
    double val_r2 = 0.0;
    bool within_tolerance = false;
};

/// Largest subtree with |train R2 - val R2| <= gap_tol, else the subtree with
/// the best validation R2.
Selection select_pruned(const PruneSequence& seq, const Eigen::MatrixXd& X_val, const Eigen::VectorXd& y_val,
                        const PrunePolicy& policy = {});

}  // namespace alloyfit::tree
