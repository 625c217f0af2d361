#include "backfire/ts_var.hpp"

#include "backfire/linreg.hpp"
#include "backfire/parallel.hpp"
#include "backfire/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace backfire::ts {

VarModel fit_var(const Eigen::Ref<const Matrix>& data, int p, int presample) {
    if (p < 1) throw std::invalid_argument("fit_var: lag order must be at least 1");
    const Index n = data.rows();
    const Index m = data.cols();
    if (m < 1) throw std::invalid_argument("fit_var: no variables");
    const Index start = std::max<Index>(p, presample);
    const Index n_eff = n - start;
    const Index k = 1 + m * p;
    if (n_eff <= k)
        throw Error("fit_var: " + std::to_string(n) + " observations are too few for VAR(" + std::to_string(p) +
                    ") in " + std::to_string(m) + " variables");

    Matrix Z(n_eff, k);
    Z.col(0).setOnes();
    for (Index r = 0; r < n_eff; ++r)
        for (int i = 1; i <= p; ++i) Z.block(r, 1 + (i - 1) * m, 1, m) = data.row(start + r - i);
    const Matrix Y = data.middleRows(start, n_eff);

    if (linreg::numerical_rank(Z) < k)
        throw RankError("fit_var: lagged design is rank deficient (constant or collinear series)");
    const Matrix B = Z.colPivHouseholderQr().solve(Y);

    VarModel model;
    model.p = p;
    model.m = static_cast<int>(m);
    model.intercept = B.row(0).transpose();
    for (int i = 0; i < p; ++i) model.A.push_back(B.middleRows(1 + i * m, m).transpose());
    model.residuals = Y - Z * B;
    const Matrix cross = model.residuals.transpose() * model.residuals;
    model.sigma = cross / static_cast<double>(n_eff - k);
    model.sigma_ml = cross / static_cast<double>(n_eff);
    model.initial = data.middleRows(start - p, p);
    model.n_eff = n_eff;
    model.first_row = start;
    model.aic = var_aic(model);
    model.spectral_radius = spectral_radius(companion_matrix(model.A));
    model.stable = model.spectral_radius < 1.0;
    if (n_eff < 5 * m * p)
        model.warnings.push_back("VAR(" + std::to_string(p) + "): only " + std::to_string(n_eff) +
                                 " observations for " + std::to_string(m * m * p + m) + " coefficients");
    if (!model.stable)
        model.warnings.push_back("VAR(" + std::to_string(p) + ") is not stable: spectral radius " +
                                 std::to_string(model.spectral_radius));
    return model;
}

double var_aic(const VarModel& model) {
    const double det = model.sigma_ml.determinant();
    const double n = static_cast<double>(model.n_eff);
    const double params = static_cast<double>(model.m) * model.m * model.p + model.m;
    if (!(det > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(det) + 2.0 * params / n;
}

LagSelection select_lag_aic(const Eigen::Ref<const Matrix>& data, int p_max) {
    if (p_max < 1) throw std::invalid_argument("select_lag_aic: p_max must be at least 1");
    const Index m = data.cols();
    if (data.rows() <= m * p_max + p_max + 1)
        throw Error("select_lag_aic: " + std::to_string(data.rows()) + " observations are too few for p_max " +
                    std::to_string(p_max));
    LagSelection sel;
    double best = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= p_max; ++p) {
        const double aic = fit_var(data, p, p_max).aic;
        sel.aic.push_back(aic);
        if (aic < best) {
            best = aic;
            sel.best = p;
        }
    }
    return sel;
}

double spectral_radius(const Eigen::Ref<const Matrix>& M) {
    const Eigen::EigenSolver<Matrix> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::string_view to_string(ShockScale s) { return s == ShockScale::Unit ? "unit" : "one-sd"; }

std::string_view to_string(Identification id) {
    return id == Identification::Cholesky ? "cholesky" : "non-orthogonalized";
}

Identification identification_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "cholesky" || lower == "orthogonalized") return Identification::Cholesky;
    if (lower == "non-orthogonalized" || lower == "nonorthogonal" || lower == "none")
        return Identification::NonOrthogonal;
    throw ConfigError("unknown IRF identification '" + std::string(s) + "'");
}

namespace {

Matrix impact_matrix(const Matrix& sigma, ShockScale scale, Identification id) {
    const Index m = sigma.rows();
    if (id == Identification::NonOrthogonal) {
        if (scale == ShockScale::Unit) return Matrix::Identity(m, m);
        return sigma.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    const Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw Error("impulse_response: residual covariance is not positive definite");
    Matrix L = llt.matrixL();
    if (scale == ShockScale::Unit) L = L * L.diagonal().cwiseInverse().asDiagonal();
    return L;
}

std::vector<Matrix> responses(const VarModel& model, int horizon, ShockScale scale, Identification id) {
    const Matrix P = impact_matrix(model.sigma, scale, id);
    std::vector<Matrix> out = ma_coefficients(model.A, horizon);
    for (auto& psi : out) psi = psi * P;
    return out;
}

}  // namespace

IrfResult impulse_response(const VarModel& model, int horizon, ShockScale scale, Identification id,
                           std::optional<BootstrapSpec> bootstrap) {
    if (horizon < 0) throw std::invalid_argument("impulse_response: negative horizon");
    IrfResult r;
    r.horizon = horizon;
    r.m = model.m;
    r.shock_scale = scale;
    r.identification = id;
    r.point = responses(model, horizon, scale, id);
    if (!model.stable) r.warnings.push_back("responses of an unstable VAR do not decay");
    if (!bootstrap || bootstrap->replicates <= 0) return r;

    const int B = bootstrap->replicates;
    const Index m = model.m;
    const Index n_eff = model.n_eff;
    const int p = model.p;
    const Matrix centred = model.residuals.rowwise() - model.residuals.colwise().mean();

    std::vector<std::optional<std::vector<Matrix>>> draws(static_cast<std::size_t>(B));
    parallel_for(draws.size(), 0, [&](std::size_t b) {
        Rng rng = Rng::stream(bootstrap->seed, "irf-bootstrap", b);
        Matrix sim(p + n_eff, m);
        sim.topRows(p) = model.initial;
        for (Index t = 0; t < n_eff; ++t) {
            Vector row = model.intercept;
            for (int i = 1; i <= p; ++i) row.noalias() += model.A[static_cast<std::size_t>(i - 1)] * sim.row(p + t - i).transpose();
            row += centred.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_eff)))).transpose();
            sim.row(p + t) = row.transpose();
        }
        try {
            draws[b] = responses(fit_var(sim, p), horizon, scale, id);
        } catch (const std::exception&) {
            draws[b].reset();
        }
    });

    std::vector<const std::vector<Matrix>*> ok;
    for (const auto& d : draws)
        if (d) ok.push_back(&*d);
    r.replicates_used = static_cast<int>(ok.size());
    r.method = "bootstrap";
    if (r.replicates_used < B)
        r.warnings.push_back(std::to_string(B - r.replicates_used) + " of " + std::to_string(B) +
                             " bootstrap replicates could not be refit and were dropped");
    if (ok.empty()) {
        r.warnings.push_back("no usable bootstrap replicates; bands omitted");
        return r;
    }

    r.lower.assign(static_cast<std::size_t>(horizon) + 1, Matrix(m, m));
    r.upper.assign(static_cast<std::size_t>(horizon) + 1, Matrix(m, m));
    std::vector<double> cell(ok.size());
    for (int h = 0; h <= horizon; ++h)
        for (Index j = 0; j < m; ++j)
            for (Index k = 0; k < m; ++k) {
                for (std::size_t b = 0; b < ok.size(); ++b) cell[b] = (*ok[b])[static_cast<std::size_t>(h)](j, k);
                r.lower[static_cast<std::size_t>(h)](j, k) = quantile(cell, 0.025);
                r.upper[static_cast<std::size_t>(h)](j, k) = quantile(cell, 0.975);
            }
    return r;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace backfire::ts
