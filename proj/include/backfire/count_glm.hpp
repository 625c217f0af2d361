#pragma once

#include "backfire/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace backfire::glm {

struct CountFitOptions {
    int max_iterations = 200;
    double tolerance = 1e-10;  ///< relative change in log-likelihood
};

/// Poisson or NB2 fit with log link.
struct CountFit {
    std::string family;  ///< "poisson" or "negbin2"
    Vector coefficients;
    Vector std_errors;
    Vector p_values;  ///< Wald, normal reference
    Vector irr;       ///< exp(coefficients)
    Vector irr_ci_lower;
    Vector irr_ci_upper;
    Matrix covariance;  ///< of the coefficients
    double alpha = 0.0;
    double alpha_se = 0.0;  ///< NaN when alpha sits on the zero boundary
    bool alpha_at_boundary = false;
    double log_likelihood = 0.0;
    double null_log_likelihood = 0.0;  ///< intercept-only model of the same family
    double pseudo_r2_mcfadden = 0.0;
    double lr_vs_poisson = 0.0;  ///< 2 (ll_nb - ll_poisson); 0 for Poisson fits
    double lr_vs_poisson_p = 1.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> ll_trace;  ///< log-likelihood after every accepted step
    Vector fitted;
    Index n = 0;
};

double poisson_log_likelihood(std::span<const double> y, const Eigen::Ref<const Vector>& mu);
/// NB2 log-likelihood, stable as alpha -> 0 (alpha == 0 is the Poisson value).
double negbin_log_likelihood(std::span<const double> y, const Eigen::Ref<const Vector>& mu, double alpha);

/// IRLS. Throws RankError for a deficient design, ConvergenceError (with the
/// log-likelihood trace in the message) when the iteration budget runs out or
/// the fitted means diverge.
CountFit fit_poisson(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                     const CountFitOptions& options = {});

/// Joint ML in (beta, alpha), alternating an IRLS step at fixed alpha with a
/// guarded Newton step in alpha. Starts from the Poisson fit and a
/// moment estimate of alpha. Standard errors come from the observed
/// information of the full (beta, alpha) likelihood.
CountFit fit_negbin(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                    const CountFitOptions& options = {});

/// exp(X_new * beta). Throws std::invalid_argument on column-count mismatch.
Vector predict_mean(const CountFit& fit, const Eigen::Ref<const Matrix>& X_new);

/// NB2 variance mu + alpha mu^2.
inline double model_variance(double mu, double alpha) { return mu + alpha * mu * mu; }

}  // namespace backfire::glm
