#pragma once

#include "backfire/core.hpp"
#include "backfire/date.hpp"
#include "backfire/tree_ensemble.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace backfire::forecast {

/// Point forecaster refit from scratch at every fold.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual void fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) = 0;
    [[nodiscard]] virtual Vector predict(const Eigen::Ref<const Matrix>& X) const = 0;
};

/// Must return a fresh, unfitted model on every call. The harness may call
/// it from several threads at once, so it must not mutate shared state.
using ModelFactory = std::function<std::unique_ptr<Regressor>()>;

/// Training-mean forecaster.
class MeanRegressor final : public Regressor {
public:
    void fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) override;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const override;

private:
    double mean_ = 0.0;
};

/// Least squares with an intercept; minimum-norm solution if X is deficient.
class OlsRegressor final : public Regressor {
public:
    void fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) override;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const override;

private:
    Vector beta_;
};

class ForestRegressor final : public Regressor {
public:
    ForestRegressor(trees::ForestParams params, std::uint64_t seed) : params_(std::move(params)), seed_(seed) {}
    void fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) override;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const override;

private:
    trees::ForestParams params_;
    std::uint64_t seed_;
    trees::ForestModel model_;
};

class BoostRegressor final : public Regressor {
public:
    BoostRegressor(trees::BoostParams params, std::uint64_t seed) : params_(params), seed_(seed) {}
    void fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) override;
    [[nodiscard]] Vector predict(const Eigen::Ref<const Matrix>& X) const override;

private:
    trees::BoostParams params_;
    std::uint64_t seed_;
    trees::BoostModel model_;
};

template <typename Model, typename... Args>
ModelFactory make_factory(Args... args) {
    return [=] { return std::unique_ptr<Regressor>(new Model(args...)); };
}

struct Metrics {
    double r2 = 0.0;
    bool r2_defined = true;  ///< false when the truths have zero variance
    double mae = 0.0;
    double rmse = 0.0;
};

/// R^2 = 1 - SSE/SST with SST about the mean of y_true.
Metrics metrics(const Eigen::Ref<const Vector>& y_true, const Eigen::Ref<const Vector>& y_pred);

struct ForecastRun {
    std::string model_id;
    std::string level;  ///< "national" or "division"
    int n_min = 0;
    std::vector<Date> fold_dates;   ///< one per prediction
    std::vector<std::string> entities;  ///< one per prediction; empty for a single series
    Vector y_true;
    Vector y_pred;
    Metrics metrics;
    std::size_t folds = 0;
};

struct WalkForwardOptions {
    int n_min = 30;
    unsigned threads = 1;  ///< 0 = hardware concurrency
    std::string model_id;
};

/// Expanding-window one-step-ahead evaluation of a single time series.
/// For t = n_min..N-1 a fresh model is fit on rows [0, t) and predicts row t.
/// Dates must be strictly increasing. A failing fold throws Error naming
/// its date.
ForecastRun walk_forward(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                         std::span<const Date> dates, const ModelFactory& factory,
                         const WalkForwardOptions& options = {});

/// Panel variant: folds are distinct dates. For the t-th distinct date
/// (t >= n_min) the model is fit on every row dated strictly earlier and
/// predicts all rows on that date. Rows may come in any order.
ForecastRun walk_forward_panel(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                               std::span<const Date> dates, std::span<const std::string> entities,
                               const ModelFactory& factory, const WalkForwardOptions& options = {});

/// `date,y_true,y_pred` (with an `entity` column for panel runs), full precision.
std::string to_csv(const ForecastRun& run);

}  // namespace backfire::forecast
