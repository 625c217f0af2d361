#include "backfire/forecast_eval.hpp"

#include "backfire/csv.hpp"
#include "backfire/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace backfire::forecast {

void MeanRegressor::fit(const Eigen::Ref<const Matrix>&, const Eigen::Ref<const Vector>& y) {
    if (y.size() == 0) throw std::invalid_argument("MeanRegressor: empty training set");
    mean_ = y.mean();
}

Vector MeanRegressor::predict(const Eigen::Ref<const Matrix>& X) const { return Vector::Constant(X.rows(), mean_); }

void OlsRegressor::fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
    Matrix Z(X.rows(), X.cols() + 1);
    Z << Vector::Ones(X.rows()), X;
    beta_ = Z.completeOrthogonalDecomposition().solve(y);
}

Vector OlsRegressor::predict(const Eigen::Ref<const Matrix>& X) const {
    if (X.cols() + 1 != beta_.size()) throw std::invalid_argument("OlsRegressor: feature count mismatch");
    return (X * beta_.tail(X.cols())).array() + beta_[0];
}

void ForestRegressor::fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
    model_ = trees::fit_forest(X, y, params_, seed_);
}

Vector ForestRegressor::predict(const Eigen::Ref<const Matrix>& X) const { return model_.predict(X); }

void BoostRegressor::fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
    model_ = trees::fit_boost(X, y, params_, seed_);
}

Vector BoostRegressor::predict(const Eigen::Ref<const Matrix>& X) const { return model_.predict(X); }

Metrics metrics(const Eigen::Ref<const Vector>& y_true, const Eigen::Ref<const Vector>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("metrics: " + std::to_string(y_true.size()) + " truths but " +
                                    std::to_string(y_pred.size()) + " predictions");
    if (y_true.size() == 0) throw std::invalid_argument("metrics: empty vectors");
    const Vector err = y_true - y_pred;
    const double n = static_cast<double>(y_true.size());
    Metrics m;
    m.mae = err.cwiseAbs().sum() / n;
    m.rmse = std::sqrt(err.squaredNorm() / n);
    const double sst = (y_true.array() - y_true.mean()).square().sum();
    if (sst > 0.0) {
        m.r2 = 1.0 - err.squaredNorm() / sst;
    } else {
        m.r2_defined = false;
        m.r2 = std::nan("");
    }
    return m;
}

ForecastRun walk_forward(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                         std::span<const Date> dates, const ModelFactory& factory, const WalkForwardOptions& options) {
    const Index N = y.size();
    if (X.rows() != N || static_cast<Index>(dates.size()) != N)
        throw std::invalid_argument("walk_forward: X, y and dates differ in length");
    if (options.n_min < 1 || N <= options.n_min)
        throw std::invalid_argument("walk_forward: need N > n_min >= 1 (N = " + std::to_string(N) +
                                    ", n_min = " + std::to_string(options.n_min) + ")");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw Error("walk_forward: rows are not strictly time-ordered at " + dates[i].to_string());

    const std::size_t folds = static_cast<std::size_t>(N - options.n_min);
    Vector pred(static_cast<Index>(folds));
    parallel_for(folds, options.threads, [&](std::size_t f) {
        const Index t = options.n_min + static_cast<Index>(f);
        try {
            auto model = factory();
            model->fit(X.topRows(t), y.head(t));
            pred[static_cast<Index>(f)] = model->predict(X.row(t))[0];
        } catch (const std::exception& e) {
            throw Error("walk_forward: fold " + dates[static_cast<std::size_t>(t)].to_string() + " failed: " + e.what());
        }
    });

    ForecastRun run;
    run.model_id = options.model_id;
    run.level = "national";
    run.n_min = options.n_min;
    run.fold_dates.assign(dates.begin() + options.n_min, dates.end());
    run.y_true = y.tail(static_cast<Index>(folds));
    run.y_pred = pred;
    run.metrics = metrics(run.y_true, run.y_pred);
    run.folds = folds;
    return run;
}

ForecastRun walk_forward_panel(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                               std::span<const Date> dates, std::span<const std::string> entities,
                               const ModelFactory& factory, const WalkForwardOptions& options) {
    const Index N = y.size();
    if (X.rows() != N || static_cast<Index>(dates.size()) != N || static_cast<Index>(entities.size()) != N)
        throw std::invalid_argument("walk_forward_panel: X, y, dates and entities differ in length");

    std::vector<Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        const auto ua = static_cast<std::size_t>(a);
        const auto ub = static_cast<std::size_t>(b);
        return std::tie(dates[ua], entities[ua]) < std::tie(dates[ub], entities[ub]);
    });
    const Matrix Xs = X(order, Eigen::all);
    const Vector ys = y(order);

    // starts[d] = first sorted row of the d-th distinct date
    std::vector<Index> starts;
    std::vector<Date> unique_dates;
    for (Index r = 0; r < N; ++r) {
        const Date d = dates[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
        if (unique_dates.empty() || unique_dates.back() != d) {
            unique_dates.push_back(d);
            starts.push_back(r);
        }
    }
    starts.push_back(N);
    const auto D = static_cast<int>(unique_dates.size());
    if (options.n_min < 1 || D <= options.n_min)
        throw std::invalid_argument("walk_forward_panel: need more than n_min = " + std::to_string(options.n_min) +
                                    " distinct dates, have " + std::to_string(D));

    const std::size_t folds = static_cast<std::size_t>(D - options.n_min);
    const Index first = starts[static_cast<std::size_t>(options.n_min)];
    Vector pred(N - first);
    parallel_for(folds, options.threads, [&](std::size_t f) {
        const auto d = static_cast<std::size_t>(options.n_min) + f;
        const Index lo = starts[d];
        const Index hi = starts[d + 1];
        try {
            auto model = factory();
            model->fit(Xs.topRows(lo), ys.head(lo));
            pred.segment(lo - first, hi - lo) = model->predict(Xs.middleRows(lo, hi - lo));
        } catch (const std::exception& e) {
            throw Error("walk_forward_panel: fold " + unique_dates[d].to_string() + " failed: " + e.what());
        }
    });

    ForecastRun run;
    run.model_id = options.model_id;
    run.level = "division";
    run.n_min = options.n_min;
    for (Index r = first; r < N; ++r) {
        const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
        run.fold_dates.push_back(dates[src]);
        run.entities.push_back(entities[src]);
    }
    run.y_true = ys.tail(N - first);
    run.y_pred = pred;
    run.metrics = metrics(run.y_true, run.y_pred);
    run.folds = folds;
    return run;
}

std::string to_csv(const ForecastRun& run) {
    const bool panel = !run.entities.empty();
    std::string out = panel ? "date,entity,y_true,y_pred\n" : "date,y_true,y_pred\n";
    for (std::size_t i = 0; i < run.fold_dates.size(); ++i) {
        out += run.fold_dates[i].to_string();
        if (panel) out += ',' + csv::escape(run.entities[i]);
        out += ',' + csv::format_double(run.y_true[static_cast<Index>(i)]);
        out += ',' + csv::format_double(run.y_pred[static_cast<Index>(i)]);
        out += '\n';
    }
    return out;
}

}  // namespace backfire::forecast
