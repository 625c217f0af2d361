#pragma once

#include "backfire/core.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backfire::linreg {

enum class SeKind { Classical, HC1, Cluster };

std::string_view to_string(SeKind kind);
/// Accepts "classical", "hc1", "cluster" (case-insensitive).
SeKind se_kind_from_string(std::string_view s);

struct OlsOptions {
    SeKind se_kind = SeKind::Classical;
    /// Cluster identifier per row; required iff se_kind == Cluster.
    std::span<const int> clusters = {};
    /// Extra parameters already swept out of y and X (e.g. fixed effects)
    /// that must be charged against the residual degrees of freedom.
    Index absorbed_dof = 0;
};

struct OlsFit {
    Vector coefficients;
    Vector std_errors;
    Vector t_values;
    Vector p_values;
    Vector ci_lower;  ///< 95%, t with df_resid
    Vector ci_upper;
    Matrix covariance;
    SeKind se_kind = SeKind::Classical;
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double ssr = 0.0;
    Vector residuals;
    Vector fitted;
    Index n = 0;
    Index k = 0;
    Index df_resid = 0;
    Index n_clusters = 0;
};

/// Least squares through a thin SVD.
///
/// Singular values below max(n, k) * eps * sigma_max count as zero; a
/// deficient design throws RankError naming the columns involved in the
/// null-space direction (labels default to "x0", "x1", ...).
///
/// HC1 scales the White sandwich by n / df_resid. The cluster estimator sums
/// score outer products within clusters and applies the
/// G/(G-1) * (n-1)/df_resid correction. p-values use t(df_resid) in every case.
OlsFit fit_ols(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X, const OlsOptions& options = {},
               std::span<const std::string> labels = {});

/// Variance inflation factors of the columns of X (which must not include an
/// intercept; one is added to every auxiliary regression). Perfectly
/// collinear columns get +infinity.
struct VifReport {
    std::vector<std::string> labels;
    Vector vif;

    [[nodiscard]] double max() const { return vif.size() ? vif.maxCoeff() : 0.0; }
};

VifReport vif(const Eigen::Ref<const Matrix>& X, std::span<const std::string> labels);

/// Columns whose removal restores full column rank, smallest-index first.
/// Empty when X has full column rank under the tolerance rule above.
std::vector<Index> dependent_columns(const Eigen::Ref<const Matrix>& X);

/// Numerical rank of X under the tolerance rule above.
Index numerical_rank(const Eigen::Ref<const Matrix>& X);

}  // namespace backfire::linreg
