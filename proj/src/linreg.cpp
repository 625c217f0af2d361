#include "backfire/linreg.hpp"

#include "backfire/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace backfire::linreg {

namespace {

using Svd = Eigen::JacobiSVD<Matrix>;

double rank_threshold(const Svd& svd, Index n, Index k) {
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    return static_cast<double>(std::max(n, k)) * std::numeric_limits<double>::epsilon() * smax;
}

std::string label_of(std::span<const std::string> labels, Index j) {
    if (static_cast<std::size_t>(j) < labels.size()) return labels[static_cast<std::size_t>(j)];
    return "x" + std::to_string(j);
}

}  // namespace

std::string_view to_string(SeKind kind) {
    switch (kind) {
        case SeKind::Classical: return "classical";
        case SeKind::HC1: return "HC1";
        case SeKind::Cluster: return "cluster";
    }
    return "unknown";
}

SeKind se_kind_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "classical") return SeKind::Classical;
    if (lower == "hc1") return SeKind::HC1;
    if (lower == "cluster") return SeKind::Cluster;
    throw ConfigError("unknown standard-error kind '" + std::string(s) + "'");
}

Index numerical_rank(const Eigen::Ref<const Matrix>& X) {
    if (X.cols() == 0) return 0;
    Svd svd(X);
    const double tol = rank_threshold(svd, X.rows(), X.cols());
    Index r = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > tol) ++r;
    return r;
}

std::vector<Index> dependent_columns(const Eigen::Ref<const Matrix>& X) {
    std::vector<Index> kept;
    std::vector<Index> dropped;
    for (Index j = 0; j < X.cols(); ++j) {
        kept.push_back(j);
        if (numerical_rank(X(Eigen::all, kept)) < static_cast<Index>(kept.size())) {
            kept.pop_back();
            dropped.push_back(j);
        }
    }
    return dropped;
}

OlsFit fit_ols(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X, const OlsOptions& options,
               std::span<const std::string> labels) {
    const Index n = X.rows();
    const Index k = X.cols();
    if (y.size() != n) throw std::invalid_argument("fit_ols: y and X row counts differ");
    if (k == 0) throw std::invalid_argument("fit_ols: empty design");
    const Index df = n - k - options.absorbed_dof;
    if (n <= k || df <= 0)
        throw RankError("fit_ols: need more observations than parameters (n=" + std::to_string(n) +
                        ", k=" + std::to_string(k + options.absorbed_dof) + ")");
    if (options.se_kind == SeKind::Cluster && options.clusters.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("fit_ols: cluster keys required for clustered standard errors");

    Svd svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double tol = rank_threshold(svd, n, k);
    if (sv[k - 1] <= tol) {
        std::ostringstream msg;
        msg << "design is rank deficient; dependent column set: {";
        bool first = true;
        for (Index i = 0; i < k; ++i) {
            if (sv[i] > tol) continue;
            const auto v = svd.matrixV().col(i);
            for (Index j = 0; j < k; ++j) {
                if (std::fabs(v[j]) <= 1e-6) continue;
                msg << (first ? "" : ", ") << label_of(labels, j);
                first = false;
            }
        }
        msg << "}";
        throw RankError(msg.str());
    }

    const Vector inv_sv = sv.cwiseInverse();
    const Matrix& V = svd.matrixV();
    OlsFit fit;
    fit.n = n;
    fit.k = k;
    fit.df_resid = df;
    fit.se_kind = options.se_kind;
    fit.coefficients = V * inv_sv.asDiagonal() * (svd.matrixU().transpose() * y);
    fit.fitted = X * fit.coefficients;
    fit.residuals = y - fit.fitted;
    fit.ssr = fit.residuals.squaredNorm();

    const double ybar = y.mean();
    const double sst = (y.array() - ybar).square().sum();
    fit.r_squared = sst > 0.0 ? 1.0 - fit.ssr / sst : 0.0;
    fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * static_cast<double>(n - 1) / static_cast<double>(df);

    const Matrix bread = V * inv_sv.array().square().matrix().asDiagonal() * V.transpose();
    switch (options.se_kind) {
        case SeKind::Classical: {
            fit.covariance = bread * (fit.ssr / static_cast<double>(df));
            break;
        }
        case SeKind::HC1: {
            const Matrix meat = X.transpose() * fit.residuals.array().square().matrix().asDiagonal() * X;
            fit.covariance = bread * meat * bread * (static_cast<double>(n) / static_cast<double>(df));
            break;
        }
        case SeKind::Cluster: {
            std::map<int, Vector> scores;
            for (Index i = 0; i < n; ++i) {
                auto [it, inserted] = scores.try_emplace(options.clusters[static_cast<std::size_t>(i)], Vector::Zero(k));
                it->second += X.row(i).transpose() * fit.residuals[i];
            }
            const auto G = static_cast<Index>(scores.size());
            if (G < 2) throw std::invalid_argument("fit_ols: clustered standard errors need at least two clusters");
            Matrix meat = Matrix::Zero(k, k);
            for (const auto& [id, s] : scores) meat.noalias() += s * s.transpose();
            const double c = static_cast<double>(G) / static_cast<double>(G - 1) * static_cast<double>(n - 1) /
                             static_cast<double>(df);
            fit.covariance = bread * meat * bread * c;
            fit.n_clusters = G;
            break;
        }
    }

    fit.std_errors = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.t_values = fit.coefficients.cwiseQuotient(fit.std_errors);
    fit.p_values.resize(k);
    const double tcrit = stats::student_t_quantile(0.975, static_cast<double>(df));
    for (Index j = 0; j < k; ++j) fit.p_values[j] = stats::student_t_two_sided(fit.t_values[j], static_cast<double>(df));
    fit.ci_lower = fit.coefficients - tcrit * fit.std_errors;
    fit.ci_upper = fit.coefficients + tcrit * fit.std_errors;
    return fit;
}

VifReport vif(const Eigen::Ref<const Matrix>& X, std::span<const std::string> labels) {
    const Index n = X.rows();
    const Index k = X.cols();
    if (k < 2) throw std::invalid_argument("vif: need at least two predictors");
    VifReport out;
    out.vif.resize(k);
    for (Index j = 0; j < k; ++j) out.labels.push_back(label_of(labels, j));

    for (Index j = 0; j < k; ++j) {
        Matrix Z(n, k);
        Z.col(0).setOnes();
        Index c = 1;
        for (Index i = 0; i < k; ++i)
            if (i != j) Z.col(c++) = X.col(i);
        const Vector target = X.col(j);
        const Vector beta = Z.completeOrthogonalDecomposition().solve(target);
        const double ssr = (target - Z * beta).squaredNorm();
        const double sst = (target.array() - target.mean()).square().sum();
        // Residual indistinguishable from rounding noise: exact linear dependence.
        const double noise = 1e-12 * std::max(1.0, target.squaredNorm());
        if (sst <= noise || ssr <= noise) {
            out.vif[j] = std::numeric_limits<double>::infinity();
        } else {
            out.vif[j] = sst / ssr;
        }
    }
    return out;
}

}  // namespace backfire::linreg
