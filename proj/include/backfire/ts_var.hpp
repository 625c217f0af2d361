#pragma once

#include "backfire/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backfire::ts {

// ---------------------------------------------------------------------------
// Unit-root testing

enum class AdfRegression { None, Constant, ConstantTrend };
std::string_view to_string(AdfRegression kind);
AdfRegression adf_regression_from_string(std::string_view s);

struct AdfCriticalValues {
    double pct1 = 0.0;
    double pct5 = 0.0;
    double pct10 = 0.0;
};

struct AdfResult {
    double test_statistic = 0.0;
    int lags_used = 0;
    Index n_obs = 0;  ///< observations in the final test regression
    AdfRegression regression_kind = AdfRegression::Constant;
    AdfCriticalValues critical;
    bool reject_1pct = false;
    bool reject_5pct = false;
    bool reject_10pct = false;
};

/// Dickey-Fuller critical values for sample size `n`, linearly
/// interpolated in 1/n between the tabulated sizes 25, 50, 100, 250, 500, inf.
AdfCriticalValues adf_critical_values(AdfRegression kind, Index n);

/// Default upper bound for the augmentation lags: floor(12 (n/100)^(1/4)).
int adf_default_max_lags(Index n);

/// Regresses dy_t on y_{t-1}, lagged differences and deterministic terms.
/// The lag count minimises AIC over 0..max_lags on a common sample; the
/// chosen regression is then refit on every available observation.
AdfResult adf_test(std::span<const double> series, AdfRegression kind = AdfRegression::Constant,
                   std::optional<int> max_lags = std::nullopt);

/// First difference, length n-1.
template <typename Derived>
auto difference(const Eigen::MatrixBase<Derived>& series) {
    if (series.size() < 2) throw std::invalid_argument("difference: need at least two observations");
    using Scalar = typename Derived::Scalar;
    const Index n = series.size();
    VectorX<Scalar> out = series.tail(n - 1) - series.head(n - 1);
    return out;
}

Vector difference(std::span<const double> series);

// ---------------------------------------------------------------------------
// Vector autoregression

struct VarModel {
    int p = 0;
    int m = 0;
    std::vector<Matrix> A;  ///< A[i] is the m x m coefficient on lag i+1
    Vector intercept;
    Matrix sigma;     ///< residual covariance, divisor n_eff - (m p + 1)
    Matrix sigma_ml;  ///< residual covariance, divisor n_eff
    Matrix residuals;  ///< n_eff x m
    Matrix initial;    ///< p x m observations preceding the first fitted row
    Index n_eff = 0;
    Index first_row = 0;  ///< row of the data matrix holding the first fitted observation
    double aic = 0.0;
    double spectral_radius = 0.0;
    bool stable = false;
    std::vector<std::string> warnings;
};

/// `data` is n x m with time running down the rows. The first usable
/// observation is row max(p, presample); rows before it serve as lags only.
VarModel fit_var(const Eigen::Ref<const Matrix>& data, int p, int presample = 0);

/// AIC = ln det(Sigma_ml) + 2 (m^2 p + m) / n_eff.
double var_aic(const VarModel& model);

struct LagSelection {
    int best = 1;
    std::vector<double> aic;  ///< aic[p-1] for p = 1..p_max
};

/// Fits VAR(1..p_max) on a common sample (the first p_max rows held out)
/// and returns the AIC minimiser; ties go to the smaller p.
LagSelection select_lag_aic(const Eigen::Ref<const Matrix>& data, int p_max);

/// mp x mp companion matrix.
template <typename Scalar>
MatrixX<Scalar> companion_matrix(const std::vector<MatrixX<Scalar>>& A) {
    if (A.empty()) throw std::invalid_argument("companion_matrix: no lag matrices");
    const Index m = A.front().rows();
    const Index p = static_cast<Index>(A.size());
    MatrixX<Scalar> C = MatrixX<Scalar>::Zero(m * p, m * p);
    for (Index i = 0; i < p; ++i) C.block(0, i * m, m, m) = A[static_cast<std::size_t>(i)];
    if (p > 1) C.block(m, 0, m * (p - 1), m * (p - 1)).setIdentity();
    return C;
}

double spectral_radius(const Eigen::Ref<const Matrix>& M);

/// Moving-average coefficients Psi_0..Psi_H by the recursion
/// Psi_0 = I, Psi_h = sum_{i=1..min(h,p)} A_i Psi_{h-i}.
template <typename Scalar>
std::vector<MatrixX<Scalar>> ma_coefficients(const std::vector<MatrixX<Scalar>>& A, int horizon) {
    if (horizon < 0) throw std::invalid_argument("ma_coefficients: negative horizon");
    if (A.empty()) throw std::invalid_argument("ma_coefficients: no lag matrices");
    const Index m = A.front().rows();
    const int p = static_cast<int>(A.size());
    std::vector<MatrixX<Scalar>> psi;
    psi.reserve(static_cast<std::size_t>(horizon) + 1);
    psi.push_back(MatrixX<Scalar>::Identity(m, m));
    for (int h = 1; h <= horizon; ++h) {
        MatrixX<Scalar> acc = MatrixX<Scalar>::Zero(m, m);
        for (int i = 1; i <= std::min(h, p); ++i)
            acc.noalias() += A[static_cast<std::size_t>(i - 1)] * psi[static_cast<std::size_t>(h - i)];
        psi.push_back(std::move(acc));
    }
    return psi;
}

enum class ShockScale { Unit, OneSd };
enum class Identification { NonOrthogonal, Cholesky };
std::string_view to_string(ShockScale s);
std::string_view to_string(Identification id);
Identification identification_from_string(std::string_view s);

struct BootstrapSpec {
    int replicates = 0;
    std::uint64_t seed = 0;
};

struct IrfResult {
    int horizon = 0;
    int m = 0;
    /// point[h](j, k): response of variable j at horizon h to a shock in k.
    std::vector<Matrix> point;
    /// Percentile 95% band; empty unless a bootstrap with B > 0 was requested.
    std::vector<Matrix> lower;
    std::vector<Matrix> upper;
    ShockScale shock_scale = ShockScale::OneSd;
    Identification identification = Identification::NonOrthogonal;
    std::string method = "none";  ///< "none" or "bootstrap"
    int replicates_used = 0;
    std::vector<std::string> warnings;
};

/// Impulse responses of a fitted VAR.
///
/// One-sd shocks scale column k by sqrt(Sigma_kk) (non-orthogonalized) or use
/// the lower Cholesky factor of Sigma (orthogonalized, variable order =
/// column order of the data). The bootstrap resamples centred residuals,
/// rebuilds the series recursively from the observed initial values, refits
/// VAR(p) and recomputes the responses; replicate b draws from stream
/// (seed, "irf-bootstrap", b), so bands do not depend on evaluation order.
IrfResult impulse_response(const VarModel& model, int horizon, ShockScale scale = ShockScale::OneSd,
                           Identification id = Identification::NonOrthogonal,
                           std::optional<BootstrapSpec> bootstrap = std::nullopt);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

}  // namespace backfire::ts
