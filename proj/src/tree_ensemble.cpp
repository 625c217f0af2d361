#include "backfire/tree_ensemble.hpp"

#include "backfire/parallel.hpp"
#include "backfire/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <set>
#include <stdexcept>

namespace backfire::trees {

namespace {

void check_inputs(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, int min_leaf) {
    if (X.cols() == 0) throw std::invalid_argument("tree fit: design has no features");
    if (X.rows() != y.size())
        throw std::invalid_argument("tree fit: " + std::to_string(X.rows()) + " rows but " +
                                    std::to_string(y.size()) + " targets");
    if (min_leaf < 1) throw std::invalid_argument("tree fit: min_samples_leaf must be at least 1");
    if (X.rows() < 2 * static_cast<Index>(min_leaf))
        throw std::invalid_argument("tree fit: " + std::to_string(X.rows()) + " rows cannot hold two leaves of " +
                                    std::to_string(min_leaf));
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("tree fit: non-finite input");
}

std::vector<std::string> default_names(std::vector<std::string> names, Index k) {
    if (names.empty())
        for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
    if (static_cast<Index>(names.size()) != k)
        throw std::invalid_argument("tree fit: " + std::to_string(names.size()) + " feature names for " +
                                    std::to_string(k) + " columns");
    return names;
}

Vector normalized(Vector gains) {
    const double total = gains.sum();
    if (total > 0.0) gains /= total;
    return gains;
}

class Builder {
public:
    Builder(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const TreeParams& params,
            std::uint64_t seed)
        : X_(X), y_(y), params_(params), rng_(Rng::stream(seed, "tree-features")) {
        const Index k = X.cols();
        all_features_.resize(static_cast<std::size_t>(k));
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
        use_subset_ = params.mtry > 0 && params.mtry < k;
    }

    RegressionTree build() {
        std::vector<Index> rows(static_cast<std::size_t>(X_.rows()));
        std::iota(rows.begin(), rows.end(), Index{0});
        grow(rows, 0);
        RegressionTree tree;
        tree.nodes = std::move(nodes_);
        tree.n_features = X_.cols();
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    int grow(std::vector<Index>& rows, int depth) {
        const auto n = static_cast<Index>(rows.size());
        // Sum in sorted order so node statistics do not depend on row order.
        std::vector<double> ys;
        ys.reserve(rows.size());
        for (Index r : rows) ys.push_back(y_[r]);
        std::sort(ys.begin(), ys.end());
        const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
        double sse = 0.0;
        for (double v : ys) sse += (v - mean) * (v - mean);

        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{.value = mean, .n = n});

        const bool depth_ok = params_.max_depth <= 0 || depth < params_.max_depth;
        if (!depth_ok || n < 2 * static_cast<Index>(params_.min_samples_leaf) || !(sse > 0.0)) return id;

        const Split best = find_split(rows, mean, sse);
        if (best.feature < 0) return id;

        std::vector<Index> left;
        std::vector<Index> right;
        for (Index r : rows) (X_(r, best.feature) <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        nodes_[static_cast<std::size_t>(id)].feature = best.feature;
        nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
        nodes_[static_cast<std::size_t>(id)].gain = best.gain;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    Split find_split(const std::vector<Index>& rows, double mean, double sse) {
        const std::vector<std::size_t> features =
            use_subset_ ? sample_without_replacement(rng_, all_features_.size(), static_cast<std::size_t>(params_.mtry))
                        : all_features_;
        const auto n = static_cast<Index>(rows.size());
        const Index min_leaf = params_.min_samples_leaf;
        Split best;
        std::vector<std::pair<double, double>> pairs(rows.size());
        for (std::size_t f : features) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                pairs[i] = {X_(rows[i], static_cast<Index>(f)), y_[rows[i]] - mean};
            std::sort(pairs.begin(), pairs.end());
            double total = 0.0;
            for (const auto& pr : pairs) total += pr.second;
            const double base = total * total / static_cast<double>(n);
            double left_sum = 0.0;
            for (Index j = 0; j + 1 < n; ++j) {
                left_sum += pairs[static_cast<std::size_t>(j)].second;
                const Index nl = j + 1;
                const Index nr = n - nl;
                if (nl < min_leaf) continue;
                if (nr < min_leaf) break;
                const double a = pairs[static_cast<std::size_t>(j)].first;
                const double b = pairs[static_cast<std::size_t>(j + 1)].first;
                if (!(a < b)) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - base;
                if (gain > best.gain) {
                    double mid = a + (b - a) / 2.0;
                    if (!(mid < b)) mid = a;
                    best = {static_cast<int>(f), mid, gain};
                }
            }
        }
        if (!(best.gain > 1e-12 * sse)) return {};
        return best;
    }

    Eigen::Ref<const Matrix> X_;
    Eigen::Ref<const Vector> y_;
    TreeParams params_;
    Rng rng_;
    std::vector<std::size_t> all_features_;
    bool use_subset_ = false;
    std::vector<TreeNode> nodes_;
};

Matrix take_rows(const Eigen::Ref<const Matrix>& X, const std::vector<Index>& idx) { return X(idx, Eigen::all); }

Vector take(const Eigen::Ref<const Vector>& y, const std::vector<Index>& idx) { return y(idx); }

}  // namespace

double RegressionTree::predict_one(const Eigen::Ref<const RowVector>& x) const {
    if (nodes.empty()) throw std::logic_error("RegressionTree::predict: tree is not fitted");
    if (x.size() != n_features)
        throw std::invalid_argument("RegressionTree::predict: expected " + std::to_string(n_features) +
                                    " features, got " + std::to_string(x.size()));
    std::size_t i = 0;
    while (nodes[i].feature >= 0)
        i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    return nodes[i].value;
}

Vector RegressionTree::predict(const Eigen::Ref<const Matrix>& X) const {
    Vector out(X.rows());
    for (Index r = 0; r < X.rows(); ++r) out[r] = predict_one(X.row(r));
    return out;
}

Index RegressionTree::leaf_count() const {
    return std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& nd) { return nd.feature < 0; });
}

int RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> d(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

Vector RegressionTree::gain_by_feature() const {
    Vector g = Vector::Zero(n_features);
    for (const auto& nd : nodes)
        if (nd.feature >= 0) g[nd.feature] += nd.gain;
    return g;
}

RegressionTree fit_tree(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                        const TreeParams& params, std::uint64_t seed) {
    check_inputs(X, y, params.min_samples_leaf);
    if (params.mtry < 0 || params.mtry > X.cols())
        throw std::invalid_argument("fit_tree: mtry " + std::to_string(params.mtry) + " exceeds " +
                                    std::to_string(X.cols()) + " features");
    return Builder(X, y, params, seed).build();
}

double ForestModel::predict_one(const Eigen::Ref<const RowVector>& x) const {
    if (trees.empty()) throw std::logic_error("ForestModel::predict: forest is not fitted");
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict_one(x);
    return sum / static_cast<double>(trees.size());
}

Vector ForestModel::predict(const Eigen::Ref<const Matrix>& X) const {
    Vector out(X.rows());
    for (Index r = 0; r < X.rows(); ++r) out[r] = predict_one(X.row(r));
    return out;
}

std::vector<Index> bootstrap_indices(Index n, std::uint64_t seed, std::uint64_t b) {
    if (n <= 0) throw std::invalid_argument("bootstrap_indices: empty sample");
    Rng rng = Rng::stream(seed, "forest-bootstrap", b);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    return idx;
}

std::uint64_t forest_tree_seed(std::uint64_t seed, std::uint64_t b) { return Rng::stream(seed, "forest-tree", b)(); }

ForestModel fit_forest(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                       const ForestParams& params, std::uint64_t seed, std::vector<std::string> feature_names) {
    if (params.n_trees < 1) throw std::invalid_argument("fit_forest: need at least one tree");
    check_inputs(X, y, params.min_samples_leaf);
    const Index k = X.cols();
    const int mtry = params.mtry.value_or(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k)))));
    if (mtry < 1 || mtry > k)
        throw std::invalid_argument("fit_forest: mtry " + std::to_string(mtry) + " outside 1.." + std::to_string(k));

    ForestModel model;
    model.feature_names = default_names(std::move(feature_names), k);
    model.mtry = mtry;
    model.seed = seed;
    model.trees.resize(static_cast<std::size_t>(params.n_trees));
    const TreeParams tp{params.max_depth, params.min_samples_leaf, mtry};
    parallel_for(model.trees.size(), params.threads, [&](std::size_t b) {
        const auto idx = bootstrap_indices(X.rows(), seed, b);
        const Matrix Xb = take_rows(X, idx);
        const Vector yb = take(y, idx);
        model.trees[b] = Builder(Xb, yb, tp, forest_tree_seed(seed, b)).build();
    });

    Vector gains = Vector::Zero(k);
    for (const auto& t : model.trees) gains += t.gain_by_feature();
    model.importance = normalized(gains);
    return model;
}

double BoostModel::predict_one(const Eigen::Ref<const RowVector>& x) const {
    if (trees.empty()) throw std::logic_error("BoostModel::predict: model is not fitted");
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict_one(x);
    return base_score + learning_rate * sum;
}

Vector BoostModel::predict(const Eigen::Ref<const Matrix>& X) const {
    Vector out(X.rows());
    for (Index r = 0; r < X.rows(); ++r) out[r] = predict_one(X.row(r));
    return out;
}

BoostModel fit_boost(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, const BoostParams& params,
                     std::uint64_t seed, std::vector<std::string> feature_names) {
    if (params.n_trees < 1) throw std::invalid_argument("fit_boost: need at least one round");
    if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0))
        throw std::invalid_argument("fit_boost: learning rate must lie in (0, 1]");
    check_inputs(X, y, params.min_samples_leaf);
    if (params.mtry < 0 || params.mtry > X.cols()) throw std::invalid_argument("fit_boost: mtry exceeds feature count");

    BoostModel model;
    model.feature_names = default_names(std::move(feature_names), X.cols());
    model.learning_rate = params.learning_rate;
    model.base_score = y.mean();
    const TreeParams tp{params.max_depth, params.min_samples_leaf, params.mtry};
    Vector pred = Vector::Constant(y.size(), model.base_score);
    Vector gains = Vector::Zero(X.cols());
    for (int k = 0; k < params.n_trees; ++k) {
        const Vector resid = y - pred;
        RegressionTree tree =
            Builder(X, resid, tp, Rng::stream(seed, "boost-round", static_cast<std::uint64_t>(k))()).build();
        pred += params.learning_rate * tree.predict(X);
        gains += tree.gain_by_feature();
        model.trees.push_back(std::move(tree));
        model.train_mse.push_back((y - pred).squaredNorm() / static_cast<double>(y.size()));
    }
    model.importance = normalized(gains);
    return model;
}

LagAggregation lag_groups(const std::vector<std::string>& names) {
    static const std::regex lag_suffix(R"((.+)_lag\d+$)");
    LagAggregation groups;
    for (const auto& name : names) {
        std::smatch m;
        const std::string base = std::regex_match(name, m, lag_suffix) ? m[1].str() : name;
        groups[base].push_back(name);
    }
    return groups;
}

ImportanceTable feature_importance(const std::vector<std::string>& names, const Vector& importance,
                                   const LagAggregation& aggregation) {
    if (static_cast<Index>(names.size()) != importance.size())
        throw std::invalid_argument("feature_importance: names and importances differ in length");
    std::map<std::string, Index> position;
    for (std::size_t j = 0; j < names.size(); ++j) position[names[j]] = static_cast<Index>(j);

    std::map<std::string, double> totals;
    std::set<std::string> grouped;
    for (const auto& [base, members] : aggregation) {
        double sum = 0.0;
        for (const auto& col : members) {
            const auto it = position.find(col);
            if (it == position.end())
                throw std::invalid_argument("feature_importance: unknown column '" + col + "' in group '" + base + "'");
            sum += importance[it->second];
            grouped.insert(col);
        }
        totals[base] += sum;
    }
    for (std::size_t j = 0; j < names.size(); ++j)
        if (!grouped.contains(names[j])) totals[names[j]] += importance[static_cast<Index>(j)];

    ImportanceTable table(totals.begin(), totals.end());
    std::stable_sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return table;
}

ImportanceTable feature_importance(const ForestModel& model, const LagAggregation& aggregation) {
    return feature_importance(model.feature_names, model.importance, aggregation);
}

ImportanceTable feature_importance(const BoostModel& model, const LagAggregation& aggregation) {
    return feature_importance(model.feature_names, model.importance, aggregation);
}

}  // namespace backfire::trees
