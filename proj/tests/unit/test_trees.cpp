#include "backfire/random.hpp"
#include "backfire/tree_ensemble.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace backfire;
using namespace backfire::trees;

namespace {

struct Data {
    Matrix X;
    Vector y;
};

Data make_data(std::uint64_t seed, Index n, Index k) {
    Rng rng(seed);
    Data d{Matrix(n, k), Vector(n)};
    for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < k; ++c) d.X(r, c) = std::round(rng.normal() * 4) / 2;
        d.y[r] = d.X(r, 0) * d.X(r, 0) - d.X(r, k - 1) + rng.normal();
    }
    return d;
}

double sse(const Vector& v) { return v.size() ? (v.array() - v.mean()).square().sum() : 0.0; }

// Smallest SSE reachable by one axis-aligned split with `min_leaf` rows per side.
double best_single_split(const Matrix& X, const Vector& y, Index min_leaf) {
    double best = sse(y);
    for (Index c = 0; c < X.cols(); ++c) {
        std::vector<double> cuts(X.col(c).begin(), X.col(c).end());
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (double cut : cuts) {
            std::vector<double> left, right;
            for (Index r = 0; r < X.rows(); ++r) (X(r, c) <= cut ? left : right).push_back(y[r]);
            if (static_cast<Index>(left.size()) < min_leaf || static_cast<Index>(right.size()) < min_leaf) continue;
            const Vector l = Eigen::Map<Vector>(left.data(), static_cast<Index>(left.size()));
            const Vector rr = Eigen::Map<Vector>(right.data(), static_cast<Index>(right.size()));
            best = std::min(best, sse(l) + sse(rr));
        }
    }
    return best;
}

}  // namespace

TEST(Tree, SeparableStep) {
    Matrix X(4, 1);
    X << -1, -2, 1, 2;
    const Vector y{{0.0, 0.0, 1.0, 1.0}};
    const auto tree = fit_tree(X, y, {.max_depth = 1});
    EXPECT_EQ(tree.leaf_count(), 2);
    EXPECT_EQ(tree.nodes[0].threshold, 0.0);
    EXPECT_EQ(tree.predict(X), y);
}

TEST(Tree, ConstantTargetIsSingleLeaf) {
    const Data d = make_data(1, 30, 3);
    const auto tree = fit_tree(d.X, Vector::Constant(30, 7.0));
    EXPECT_EQ(tree.leaf_count(), 1);
    EXPECT_EQ(tree.predict_one(d.X.row(0)), 7.0);
}

TEST(Tree, InterpolatesDistinctPoints) {
    Matrix X(4, 1);
    X << 1, 2, 3, 4;
    const Vector y = X.col(0);
    const auto tree = fit_tree(X, y, {.max_depth = 2, .min_samples_leaf = 1});
    EXPECT_EQ(tree.leaf_count(), 4);
    EXPECT_EQ(tree.depth(), 2);
    EXPECT_EQ(tree.predict(X), y);
}

TEST(Tree, LeafValuesAreNodeMeans) {
    const Data d = make_data(2, 80, 3);
    const auto tree = fit_tree(d.X, d.y, {.max_depth = 3, .min_samples_leaf = 5});
    // Route every row and compare each leaf value with the mean of its rows.
    std::map<int, std::vector<double>> routed;
    for (Index r = 0; r < d.X.rows(); ++r) {
        int node = 0;
        while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
            const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
            node = d.X(r, nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        routed[node].push_back(d.y[r]);
    }
    for (const auto& [node, ys] : routed) {
        const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
        EXPECT_NEAR(tree.nodes[static_cast<std::size_t>(node)].value, mean, 1e-12);
        EXPECT_GE(static_cast<Index>(ys.size()), 5);
    }
    for (const auto& nd : tree.nodes)
        if (nd.feature >= 0) {
            EXPECT_GT(nd.gain, 0.0);
        }
}

TEST(Tree, DepthOneMatchesExhaustiveSearch) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Data d = make_data(100 + s, 20 + static_cast<Index>(s) * 5, 3);
        for (int leaf : {1, 3}) {
            const auto tree = fit_tree(d.X, d.y, {.max_depth = 1, .min_samples_leaf = leaf});
            const double got = (d.y - tree.predict(d.X)).squaredNorm();
            EXPECT_NEAR(got, best_single_split(d.X, d.y, leaf), 1e-9 * std::max(1.0, sse(d.y)));
        }
    }
}

TEST(Tree, RowPermutationLeavesStructureUnchanged) {
    const Data d = make_data(3, 60, 4);
    std::vector<Index> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(4);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = fit_tree(d.X, d.y, {.max_depth = 4});
    const auto b = fit_tree(d.X(perm, Eigen::all), d.y(perm), {.max_depth = 4});
    ASSERT_EQ(a.nodes.size(), b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
        EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
        EXPECT_EQ(a.nodes[i].value, b.nodes[i].value);
    }
}

TEST(Tree, InputErrors) {
    EXPECT_THROW(fit_tree(Matrix(5, 0), Vector::Zero(5)), std::invalid_argument);
    Matrix X = Matrix::Ones(4, 1);
    X(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(fit_tree(X, Vector::Zero(4)), std::invalid_argument);
}

TEST(Forest, PredictionIsMeanOfTrees) {
    const Data d = make_data(5, 80, 4);
    const auto forest = fit_forest(d.X, d.y, {.n_trees = 25, .threads = 1}, 11);
    const Data probe = make_data(6, 30, 4);
    Vector mean = Vector::Zero(30);
    for (const auto& t : forest.trees) mean += t.predict(probe.X);
    mean /= 25.0;
    EXPECT_LT((forest.predict(probe.X) - mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(forest.mtry, 2);
}

TEST(Forest, SingleTreeMatchesBootstrapFit) {
    const Data d = make_data(7, 50, 3);
    const ForestParams params{.n_trees = 1, .max_depth = 0, .min_samples_leaf = 2, .mtry = 2, .threads = 1};
    const auto forest = fit_forest(d.X, d.y, params, 42);
    const auto idx = bootstrap_indices(50, 42, 0);
    const auto tree = fit_tree(d.X(idx, Eigen::all), d.y(idx), {.max_depth = 0, .min_samples_leaf = 2, .mtry = 2},
                               forest_tree_seed(42, 0));
    EXPECT_EQ(forest.predict(d.X), tree.predict(d.X));
}

TEST(Forest, AllFeaturesOnSeparableDataGivesIdenticalTrees) {
    Matrix X(40, 2);
    Vector y(40);
    for (Index r = 0; r < 40; ++r) {
        X(r, 0) = r < 20 ? 0.0 : 1.0;
        X(r, 1) = r < 20 ? 5.0 : 3.0;
        y[r] = X(r, 0);
    }
    const auto forest = fit_forest(X, y, {.n_trees = 10, .max_depth = 1, .min_samples_leaf = 1, .mtry = 2}, 3);
    // Two-valued columns: every bootstrap sample yields the same split.
    for (const auto& t : forest.trees) {
        EXPECT_EQ(t.nodes[0].feature, forest.trees[0].nodes[0].feature);
        EXPECT_EQ(t.predict(X), forest.trees[0].predict(X));
    }
}

TEST(Forest, ThreadCountDoesNotChangeResult) {
    const Data d = make_data(8, 60, 4);
    const auto a = fit_forest(d.X, d.y, {.n_trees = 30, .threads = 1}, 5);
    const auto b = fit_forest(d.X, d.y, {.n_trees = 30, .threads = 4}, 5);
    EXPECT_EQ(a.predict(d.X), b.predict(d.X));
    EXPECT_EQ(a.importance, b.importance);
}

TEST(Forest, InvalidMtry) {
    const Data d = make_data(9, 20, 3);
    EXPECT_THROW(fit_forest(d.X, d.y, {.n_trees = 2, .mtry = 4}), std::invalid_argument);
    EXPECT_THROW(fit_forest(d.X, d.y, {.n_trees = 0}), std::invalid_argument);
}

TEST(Boost, SingleRoundUpdateRule) {
    const Data d = make_data(10, 40, 2);
    const auto model = fit_boost(d.X, d.y, {.n_trees = 1, .learning_rate = 0.5, .max_depth = 2}, 1);
    const Vector resid = d.y.array() - d.y.mean();
    const auto tree = fit_tree(d.X, resid, {.max_depth = 2, .min_samples_leaf = 1}, 0);
    EXPECT_EQ(model.base_score, d.y.mean());
    EXPECT_LT((model.predict(d.X) - (d.y.mean() + 0.5 * tree.predict(d.X).array()).matrix()).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(Boost, FullStepInterpolates) {
    Matrix X(6, 1);
    X << 3, 1, 4, 1.5, 9, 2.6;
    const Vector y{{2.0, 7.0, 1.0, 8.0, 2.0, 8.0}};
    const auto model = fit_boost(X, y, {.n_trees = 1, .learning_rate = 1.0, .max_depth = 0}, 1);
    EXPECT_LT((model.predict(X) - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Boost, TrainingErrorNonincreasing) {
    const Data d = make_data(11, 100, 3);
    const auto model = fit_boost(d.X, d.y, {.n_trees = 50, .learning_rate = 0.3, .max_depth = 2}, 2);
    ASSERT_EQ(model.train_mse.size(), 50u);
    for (std::size_t k = 1; k < 50; ++k) EXPECT_LE(model.train_mse[k], model.train_mse[k - 1] + 1e-12);
    EXPECT_NEAR(model.train_mse.back(), (d.y - model.predict(d.X)).squaredNorm() / 100.0, 1e-10);
}

TEST(Boost, ParameterErrors) {
    const Data d = make_data(12, 20, 2);
    EXPECT_THROW(fit_boost(d.X, d.y, {.n_trees = 0}), std::invalid_argument);
    EXPECT_THROW(fit_boost(d.X, d.y, {.learning_rate = 0.0}), std::invalid_argument);
    EXPECT_THROW(fit_boost(d.X, d.y, {.learning_rate = 1.5}), std::invalid_argument);
}

TEST(Importance, NormalizedAndAggregated) {
    const Data d = make_data(13, 80, 4);
    const auto forest = fit_forest(d.X, d.y, {.n_trees = 20, .threads = 1}, 1);
    EXPECT_TRUE((forest.importance.array() >= 0).all());
    EXPECT_NEAR(forest.importance.sum(), 1.0, 1e-12);

    const std::vector<std::string> names = {"force_lag1", "force_lag2", "arrests_lag1"};
    const Vector imp{{0.6, 0.3, 0.1}};
    const auto table = feature_importance(names, imp, lag_groups(names));
    ASSERT_EQ(table.size(), 2u);
    EXPECT_EQ(table[0].first, "force");
    EXPECT_NEAR(table[0].second, 0.9, 1e-15);
    EXPECT_EQ(table[1].first, "arrests");

    const LagAggregation bad = {{"x", {"missing_column"}}};
    EXPECT_THROW(feature_importance(names, imp, bad), std::invalid_argument);
}

TEST(Importance, SingleFeatureModel) {
    const Data d = make_data(14, 50, 1);
    const auto model = fit_boost(d.X, d.y, {.n_trees = 10}, 1, {"only"});
    const auto table = feature_importance(model, {});
    ASSERT_EQ(table.size(), 1u);
    EXPECT_EQ(table[0].first, "only");
    EXPECT_NEAR(table[0].second, 1.0, 1e-12);
}
