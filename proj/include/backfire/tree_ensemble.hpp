#pragma once

#include "backfire/core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace backfire::trees {

struct TreeNode {
    int feature = -1;  ///< -1 for a leaf
    double threshold = 0.0;  ///< rows with x <= threshold go left
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< mean training target of the node
    Index n = 0;
    double gain = 0.0;  ///< SSE reduction of the split, 0 for leaves
};

struct TreeParams {
    int max_depth = 0;  ///< 0 means unlimited
    int min_samples_leaf = 1;
    int mtry = 0;  ///< features tried per split; 0 means all
};

/// CART regression tree on squared error with exact sorted splits.
class RegressionTree {
public:
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root
    Index n_features = 0;

    [[nodiscard]] double predict_one(const Eigen::Ref<const RowVector>& x) const;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const;
    [[nodiscard]] Index leaf_count() const;
    [[nodiscard]] int depth() const;
    /// Total SSE reduction attributed to each feature.
    [[nodiscard]] Vector gain_by_feature() const;
};

/// Greedy depth-first CART. Candidate thresholds are midpoints of
/// consecutive distinct values; ties go to the lowest feature index, then the
/// lowest threshold. A split is kept only if its gain exceeds 1e-12 times the
/// node SSE. With mtry < #features the per-split feature subset is drawn from
/// the stream (seed, "tree-features").
RegressionTree fit_tree(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                        const TreeParams& params = {}, std::uint64_t seed = 0);

struct ForestParams {
    int n_trees = 500;
    int max_depth = 0;
    int min_samples_leaf = 2;
    std::optional<int> mtry;  ///< default ceil(sqrt(#features))
    unsigned threads = 0;     ///< 0 = hardware concurrency
};

struct ForestModel {
    std::vector<RegressionTree> trees;
    std::vector<std::string> feature_names;
    int mtry = 0;
    std::uint64_t seed = 0;
    Vector importance;  ///< per column, sums to 1 when any split exists

    [[nodiscard]] double predict_one(const Eigen::Ref<const RowVector>& x) const;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const;
};

/// Row indices of bootstrap sample b: n draws with replacement from
/// stream (seed, "forest-bootstrap", b).
std::vector<Index> bootstrap_indices(Index n, std::uint64_t seed, std::uint64_t b);
/// Seed handed to fit_tree for tree b of a forest.
std::uint64_t forest_tree_seed(std::uint64_t seed, std::uint64_t b);

/// Bagged trees; tree b sees rows bootstrap_indices(n, seed, b) and is grown
/// with fit_tree(..., forest_tree_seed(seed, b)).
ForestModel fit_forest(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                       const ForestParams& params = {}, std::uint64_t seed = 0,
                       std::vector<std::string> feature_names = {});

struct BoostParams {
    int n_trees = 300;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 1;
    int mtry = 0;
};

struct BoostModel {
    std::vector<RegressionTree> trees;
    std::vector<std::string> feature_names;
    double base_score = 0.0;
    double learning_rate = 0.1;
    Vector importance;
    std::vector<double> train_mse;  ///< after each boosting round

    [[nodiscard]] double predict_one(const Eigen::Ref<const RowVector>& x) const;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const;
};

/// Gradient boosting on squared error: base score mean(y), each round fits a
/// tree to the current residuals and adds learning_rate times its output.
BoostModel fit_boost(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                     const BoostParams& params = {}, std::uint64_t seed = 0,
                     std::vector<std::string> feature_names = {});

using ImportanceTable = std::vector<std::pair<std::string, double>>;
using LagAggregation = std::map<std::string, std::vector<std::string>>;

/// Groups `<base>_lag<k>` columns under `<base>`; other columns map to themselves.
LagAggregation lag_groups(const std::vector<std::string>& names);

/// Sums column importances into base features. Columns not listed in any
/// group are reported under their own name. Sorted by decreasing importance,
/// then by name. Throws std::invalid_argument for an unknown column.
ImportanceTable feature_importance(const std::vector<std::string>& names, const Vector& importance,
                                   const LagAggregation& aggregation);
ImportanceTable feature_importance(const ForestModel& model, const LagAggregation& aggregation);
ImportanceTable feature_importance(const BoostModel& model, const LagAggregation& aggregation);

}  // namespace backfire::trees
