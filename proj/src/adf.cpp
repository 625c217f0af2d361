#include "backfire/linreg.hpp"
#include "backfire/ts_var.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>

namespace backfire::ts {

namespace {

// Dickey-Fuller tau critical values (Fuller 1976, as reprinted in Hamilton
// 1994, table B.6). Rows: sample sizes below; columns: 1%, 5%, 10%.
constexpr std::array<double, 6> kSizes = {25, 50, 100, 250, 500, std::numeric_limits<double>::infinity()};

constexpr double kNone[6][3] = {{-2.66, -1.95, -1.60}, {-2.62, -1.95, -1.61}, {-2.60, -1.95, -1.61},
                                {-2.58, -1.95, -1.62}, {-2.58, -1.95, -1.62}, {-2.58, -1.95, -1.62}};
constexpr double kConstant[6][3] = {{-3.75, -3.00, -2.63}, {-3.58, -2.93, -2.60}, {-3.51, -2.89, -2.58},
                                    {-3.46, -2.88, -2.57}, {-3.44, -2.87, -2.57}, {-3.43, -2.86, -2.57}};
constexpr double kTrend[6][3] = {{-4.38, -3.60, -3.24}, {-4.15, -3.50, -3.18}, {-4.04, -3.45, -3.15},
                                 {-3.99, -3.43, -3.13}, {-3.98, -3.42, -3.13}, {-3.96, -3.41, -3.12}};

struct AdfDesign {
    Vector dy;
    Matrix X;  // column 0 is y_{t-1}
};

// Rows t = first..n-2 of the differenced series.
AdfDesign build(std::span<const double> y, int lags, int first, AdfRegression kind) {
    const int n = static_cast<int>(y.size());
    const int rows = n - 1 - first;
    const int det = kind == AdfRegression::None ? 0 : (kind == AdfRegression::Constant ? 1 : 2);
    AdfDesign d;
    d.dy.resize(rows);
    d.X.resize(rows, 1 + lags + det);
    for (int r = 0; r < rows; ++r) {
        const int t = first + r;
        d.dy[r] = y[static_cast<std::size_t>(t + 1)] - y[static_cast<std::size_t>(t)];
        d.X(r, 0) = y[static_cast<std::size_t>(t)];
        for (int j = 1; j <= lags; ++j)
            d.X(r, j) = y[static_cast<std::size_t>(t - j + 1)] - y[static_cast<std::size_t>(t - j)];
        if (det >= 1) d.X(r, 1 + lags) = 1.0;
        if (det >= 2) d.X(r, 2 + lags) = static_cast<double>(t + 1);
    }
    return d;
}

}  // namespace

std::string_view to_string(AdfRegression kind) {
    switch (kind) {
        case AdfRegression::None: return "none";
        case AdfRegression::Constant: return "constant";
        case AdfRegression::ConstantTrend: return "constant+trend";
    }
    return "unknown";
}

AdfRegression adf_regression_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "none" || lower == "n") return AdfRegression::None;
    if (lower == "constant" || lower == "c") return AdfRegression::Constant;
    if (lower == "constant+trend" || lower == "ct") return AdfRegression::ConstantTrend;
    throw ConfigError("unknown ADF regression kind '" + std::string(s) + "'");
}

AdfCriticalValues adf_critical_values(AdfRegression kind, Index n) {
    const auto& table = kind == AdfRegression::None ? kNone : (kind == AdfRegression::Constant ? kConstant : kTrend);
    const double x = 1.0 / static_cast<double>(std::max<Index>(n, 1));
    auto row = [&](std::size_t i) { return AdfCriticalValues{table[i][0], table[i][1], table[i][2]}; };
    if (x >= 1.0 / kSizes[0]) return row(0);
    for (std::size_t i = 0; i + 1 < kSizes.size(); ++i) {
        const double x0 = 1.0 / kSizes[i];
        const double x1 = 1.0 / kSizes[i + 1];  // 0 for the asymptotic row
        if (x <= x0 && x >= x1) {
            const double w = (x0 - x) / (x0 - x1);
            auto lerp = [&](int c) { return (1.0 - w) * table[i][c] + w * table[i + 1][c]; };
            return {lerp(0), lerp(1), lerp(2)};
        }
    }
    return row(kSizes.size() - 1);
}

int adf_default_max_lags(Index n) {
    return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

AdfResult adf_test(std::span<const double> series, AdfRegression kind, std::optional<int> max_lags) {
    const Index n = static_cast<Index>(series.size());
    const int L = max_lags.value_or(adf_default_max_lags(n));
    if (L < 0) throw std::invalid_argument("adf_test: negative max_lags");
    if (n <= 10 + L)
        throw std::invalid_argument("adf_test: series of length " + std::to_string(n) + " is too short for " +
                                    std::to_string(L) + " lags");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (*lo == *hi) throw std::invalid_argument("adf_test: constant series");

    int best = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int lag = 0; lag <= L; ++lag) {
        const AdfDesign d = build(series, lag, L, kind);
        const Eigen::HouseholderQR<Matrix> qr(d.X);
        const Vector beta = qr.solve(d.dy);
        const double ssr = (d.dy - d.X * beta).squaredNorm();
        const double nobs = static_cast<double>(d.dy.size());
        const double aic = nobs * std::log(ssr / nobs) + 2.0 * static_cast<double>(d.X.cols());
        if (aic < best_aic) {
            best_aic = aic;
            best = lag;
        }
    }

    const AdfDesign d = build(series, best, best, kind);
    linreg::OlsFit fit;
    try {
        fit = linreg::fit_ols(d.dy, d.X);
    } catch (const RankError& e) {
        throw std::invalid_argument(std::string("adf_test: degenerate test regression: ") + e.what());
    }

    AdfResult r;
    r.regression_kind = kind;
    r.lags_used = best;
    r.n_obs = d.dy.size();
    r.test_statistic = fit.t_values[0];
    r.critical = adf_critical_values(kind, r.n_obs);
    r.reject_1pct = r.test_statistic < r.critical.pct1;
    r.reject_5pct = r.test_statistic < r.critical.pct5;
    r.reject_10pct = r.test_statistic < r.critical.pct10;
    return r;
}

Vector difference(std::span<const double> series) {
    return difference(Eigen::Map<const Vector>(series.data(), static_cast<Index>(series.size())));
}

}  // namespace backfire::ts
