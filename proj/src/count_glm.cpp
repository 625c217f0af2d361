#include "backfire/count_glm.hpp"

#include "backfire/linreg.hpp"
#include "backfire/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace backfire::glm {

namespace {

constexpr double kMaxEta = 700.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate_counts(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X) {
    if (y.size() != X.rows()) throw std::invalid_argument("count fit: y and X row counts differ");
    if (X.cols() == 0) throw std::invalid_argument("count fit: empty design");
    for (Index i = 0; i < y.size(); ++i) {
        if (!(y[i] >= 0.0) || std::fabs(y[i] - std::round(y[i])) > 1e-9)
            throw std::invalid_argument("count fit: response must hold nonnegative integers (row " + std::to_string(i) +
                                        ")");
    }
    if (linreg::numerical_rank(X) < X.cols())
        throw RankError("count fit: design is rank deficient (a regressor is constant or collinear)");
}

std::string trace_text(const std::vector<double>& trace) {
    std::ostringstream s;
    s.precision(10);
    const std::size_t from = trace.size() > 8 ? trace.size() - 8 : 0;
    for (std::size_t i = from; i < trace.size(); ++i) s << (i == from ? "" : ", ") << trace[i];
    return s.str();
}

// Sum_{j<y} log(1 + alpha j).
double log_rising(double y, double alpha) {
    if (alpha == 0.0 || y < 1.0) return 0.0;
    if (y > 1000.0) return y * std::log(alpha) + std::lgamma(y + 1.0 / alpha) - std::lgamma(1.0 / alpha);
    double s = 0.0;
    for (double j = 1.0; j < y; j += 1.0) s += std::log1p(alpha * j);
    return s;
}

// (log1p(u) - u/(1+u)) / u^2
double h_over_u2(double u) {
    if (u < 1e-2) {
        double s = 0.0, p = 1.0;
        for (int n = 2; n <= 12; ++n) {
            s += ((n % 2 == 0) ? 1.0 : -1.0) * (n - 1.0) / n * p;
            p *= u;
        }
        return s;
    }
    return (std::log1p(u) - u / (1.0 + u)) / (u * u);
}

// (u^2/(1+u)^2 - 2 (log1p(u) - u/(1+u))) / u^3
double k_over_u3(double u) {
    if (u < 1e-2) {
        double s = 0.0, p = 1.0;
        for (int n = 3; n <= 13; ++n) {
            s += ((n % 2 == 0) ? 1.0 : -1.0) * (n - 1.0) * (n - 2.0) / n * p;
            p *= u;
        }
        return s;
    }
    const double h = std::log1p(u) - u / (1.0 + u);
    return (u * u / ((1.0 + u) * (1.0 + u)) - 2.0 * h) / (u * u * u);
}

struct AlphaDerivs {
    double score = 0.0;
    double hessian = 0.0;
};

AlphaDerivs alpha_derivatives(const Eigen::Ref<const Vector>& y, const Vector& mu, double alpha) {
    AlphaDerivs d;
    for (Index i = 0; i < y.size(); ++i) {
        const double yi = y[i];
        const double m = mu[i];
        const double u = alpha * m;
        double s1 = 0.0, s2 = 0.0;
        for (double j = 1.0; j < yi; j += 1.0) {
            const double q = 1.0 + alpha * j;
            s1 += j / q;
            s2 += j * j / (q * q);
        }
        d.score += s1 + m * m * h_over_u2(u) - yi * m / (1.0 + u);
        d.hessian += -s2 + m * m * m * k_over_u3(u) + yi * m * m / ((1.0 + u) * (1.0 + u));
    }
    return d;
}

struct IrlsState {
    Vector beta;
    Vector mu;
    double ll = -std::numeric_limits<double>::infinity();
};

double family_ll(const Eigen::Ref<const Vector>& y, const Vector& mu, double alpha) {
    return negbin_log_likelihood(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), mu, alpha);
}

Vector mean_from(const Eigen::Ref<const Matrix>& X, const Vector& beta) {
    const Vector eta = X * beta;
    if ((eta.array() > kMaxEta).any() || !eta.allFinite())
        throw ConvergenceError("count fit: fitted means diverge (possible separation)");
    return eta.array().exp().matrix();
}

// IRLS at fixed alpha (alpha == 0 is Poisson). Each accepted step raises the
// log-likelihood; rejected steps are halved back toward the previous beta.
IrlsState irls(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X, double alpha, IrlsState state,
               const CountFitOptions& options, std::vector<double>& trace, int& iterations, bool& converged) {
    converged = false;
    const bool fresh = state.beta.size() == 0;
    Vector mu = fresh ? Vector((y.array() + 0.1).matrix()) : state.mu;
    for (int it = 0; it < options.max_iterations; ++it) {
        ++iterations;
        const Vector w = (mu.array() / (1.0 + alpha * mu.array())).matrix();
        const Vector z = (mu.array().log() + (y.array() - mu.array()) / mu.array()).matrix();
        const Vector sw = w.cwiseSqrt();
        const Matrix Xw = sw.asDiagonal() * X;
        Vector beta = Xw.householderQr().solve((sw.array() * z.array()).matrix());

        Vector new_mu;
        double new_ll = -std::numeric_limits<double>::infinity();
        for (int half = 0; half < 60; ++half) {
            try {
                new_mu = mean_from(X, beta);
                new_ll = family_ll(y, new_mu, alpha);
            } catch (const ConvergenceError&) {
                if (state.beta.size() == 0) throw;
                new_ll = -std::numeric_limits<double>::infinity();
            }
            if (state.beta.size() == 0 || new_ll >= state.ll - 1e-12 * std::fabs(state.ll)) break;
            beta = 0.5 * (beta + state.beta);
        }
        if (!(new_ll >= state.ll - 1e-12 * std::fabs(state.ll)) && state.beta.size() != 0) {
            converged = true;  // no further ascent possible at this precision
            return state;
        }
        const double prev = state.ll;
        state.beta = beta;
        state.mu = new_mu;
        state.ll = new_ll;
        trace.push_back(new_ll);
        mu = new_mu;
        if (std::isfinite(prev) && std::fabs(new_ll - prev) <= options.tolerance * (std::fabs(new_ll) + 0.1)) {
            converged = true;
            return state;
        }
    }
    return state;
}

// One-dimensional maximization in alpha with a guard at zero.
double alpha_step(const Eigen::Ref<const Vector>& y, const Vector& mu, double alpha, bool& at_boundary) {
    at_boundary = false;
    double ll = family_ll(y, mu, alpha);
    for (int it = 0; it < 100; ++it) {
        const AlphaDerivs d = alpha_derivatives(y, mu, alpha);
        if (alpha == 0.0 && d.score <= 0.0) {
            at_boundary = true;
            return 0.0;
        }
        double next;
        if (d.hessian < 0.0) {
            next = alpha - d.score / d.hessian;
        } else {
            next = d.score > 0.0 ? std::max(2.0 * alpha, 1e-4) : 0.5 * alpha;
        }
        if (next <= 0.0) next = 0.0;
        double next_ll = family_ll(y, mu, next);
        for (int half = 0; half < 60 && next_ll < ll; ++half) {
            next = 0.5 * (next + alpha);
            next_ll = family_ll(y, mu, next);
        }
        if (next_ll < ll) break;
        const double delta = std::fabs(next - alpha);
        alpha = next;
        ll = next_ll;
        if (delta <= 1e-12 * (1.0 + alpha)) break;
    }
    if (alpha == 0.0) at_boundary = alpha_derivatives(y, mu, 0.0).score <= 0.0;
    return alpha;
}

void fill_inference(CountFit& fit, const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X) {
    const Index k = X.cols();
    const double a = fit.alpha;
    const Vector& mu = fit.fitted;
    if (fit.family == "poisson" || fit.alpha_at_boundary) {
        const Matrix info = X.transpose() * mu.asDiagonal() * X;
        fit.covariance = info.inverse();
        fit.alpha_se = fit.family == "poisson" ? 0.0 : kNaN;
    } else {
        Matrix info = Matrix::Zero(k + 1, k + 1);
        Vector wbb(y.size()), wba(y.size());
        for (Index i = 0; i < y.size(); ++i) {
            const double q = 1.0 + a * mu[i];
            wbb[i] = mu[i] * (1.0 + a * y[i]) / (q * q);
            wba[i] = (y[i] - mu[i]) * mu[i] / (q * q);
        }
        info.topLeftCorner(k, k) = X.transpose() * wbb.asDiagonal() * X;
        info.block(0, k, k, 1) = X.transpose() * wba;
        info.block(k, 0, 1, k) = info.block(0, k, k, 1).transpose();
        info(k, k) = -alpha_derivatives(y, mu, a).hessian;
        const Matrix cov = info.inverse();
        fit.covariance = cov.topLeftCorner(k, k);
        fit.alpha_se = std::sqrt(std::max(cov(k, k), 0.0));
    }
    fit.std_errors = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.p_values.resize(k);
    for (Index j = 0; j < k; ++j)
        fit.p_values[j] = 2.0 * (1.0 - stats::normal_cdf(std::fabs(fit.coefficients[j] / fit.std_errors[j])));
    fit.irr = fit.coefficients.array().exp().matrix();
    fit.irr_ci_lower = (fit.coefficients - stats::kZ975 * fit.std_errors).array().exp().matrix();
    fit.irr_ci_upper = (fit.coefficients + stats::kZ975 * fit.std_errors).array().exp().matrix();
}

CountFit poisson_impl(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                      const CountFitOptions& options, bool with_null) {
    validate_counts(y, X);
    CountFit fit;
    fit.family = "poisson";
    fit.n = y.size();
    bool converged = false;
    IrlsState st = irls(y, X, 0.0, {}, options, fit.ll_trace, fit.iterations, converged);
    if (!converged)
        throw ConvergenceError("poisson: no convergence after " + std::to_string(options.max_iterations) +
                               " iterations; log-likelihood trace: " + trace_text(fit.ll_trace));
    fit.converged = true;
    fit.coefficients = st.beta;
    fit.fitted = st.mu;
    fit.log_likelihood = st.ll;
    fill_inference(fit, y, X);
    if (with_null) {
        const double ybar = y.mean();
        const Vector mu0 = Vector::Constant(y.size(), ybar);
        fit.null_log_likelihood = ybar > 0.0 ? family_ll(y, mu0, 0.0) : 0.0;
        fit.pseudo_r2_mcfadden = fit.null_log_likelihood != 0.0 ? 1.0 - fit.log_likelihood / fit.null_log_likelihood : 0.0;
    }
    return fit;
}

CountFit negbin_impl(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                     const CountFitOptions& options, bool with_null) {
    const CountFit pois = poisson_impl(y, X, options, false);
    CountFit fit;
    fit.family = "negbin2";
    fit.n = y.size();

    IrlsState st{pois.coefficients, pois.fitted, 0.0};
    const double num = ((y - st.mu).array().square() - y.array()).sum();
    double alpha = std::max(0.0, num / st.mu.squaredNorm());
    st.ll = family_ll(y, st.mu, alpha);
    fit.ll_trace.push_back(st.ll);

    bool at_boundary = false;
    bool converged = false;
    for (int outer = 0; outer < options.max_iterations; ++outer) {
        const double ll_before = st.ll;
        const double alpha_before = alpha;
        bool inner_ok = false;
        st = irls(y, X, alpha, st, options, fit.ll_trace, fit.iterations, inner_ok);
        alpha = alpha_step(y, st.mu, alpha, at_boundary);
        st.ll = family_ll(y, st.mu, alpha);
        fit.ll_trace.push_back(st.ll);
        if (std::fabs(st.ll - ll_before) <= options.tolerance * (std::fabs(st.ll) + 0.1) &&
            std::fabs(alpha - alpha_before) <= 1e-7 * (1.0 + alpha)) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("negbin: no convergence after " + std::to_string(options.max_iterations) +
                               " outer iterations; log-likelihood trace: " + trace_text(fit.ll_trace));
    fit.converged = true;
    fit.coefficients = st.beta;
    fit.fitted = st.mu;
    fit.alpha = alpha;
    fit.alpha_at_boundary = at_boundary;
    fit.log_likelihood = st.ll;
    fill_inference(fit, y, X);

    fit.lr_vs_poisson = std::max(0.0, 2.0 * (fit.log_likelihood - pois.log_likelihood));
    fit.lr_vs_poisson_p = 0.5 * stats::chi2_1_sf(fit.lr_vs_poisson);

    if (with_null) {
        const Matrix ones = Matrix::Ones(y.size(), 1);
        if (y.sum() > 0.0) {
            const CountFit null_fit = negbin_impl(y, ones, options, false);
            fit.null_log_likelihood = null_fit.log_likelihood;
            fit.pseudo_r2_mcfadden = 1.0 - fit.log_likelihood / fit.null_log_likelihood;
        }
    }
    return fit;
}

}  // namespace

double poisson_log_likelihood(std::span<const double> y, const Eigen::Ref<const Vector>& mu) {
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = mu[static_cast<Index>(i)];
        ll += (y[i] > 0.0 ? y[i] * std::log(m) : 0.0) - m - std::lgamma(y[i] + 1.0);
    }
    return ll;
}

double negbin_log_likelihood(std::span<const double> y, const Eigen::Ref<const Vector>& mu, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("negbin_log_likelihood: negative alpha");
    if (alpha == 0.0) return poisson_log_likelihood(y, mu);
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double yi = y[i];
        const double m = mu[static_cast<Index>(i)];
        ll += log_rising(yi, alpha) + (yi > 0.0 ? yi * std::log(m) : 0.0) - std::lgamma(yi + 1.0) -
              (yi + 1.0 / alpha) * std::log1p(alpha * m);
    }
    return ll;
}

CountFit fit_poisson(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                     const CountFitOptions& options) {
    return poisson_impl(y, X, options, true);
}

CountFit fit_negbin(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                    const CountFitOptions& options) {
    return negbin_impl(y, X, options, true);
}

Vector predict_mean(const CountFit& fit, const Eigen::Ref<const Matrix>& X_new) {
    if (X_new.cols() != fit.coefficients.size())
        throw std::invalid_argument("predict_mean: expected " + std::to_string(fit.coefficients.size()) +
                                    " columns, got " + std::to_string(X_new.cols()));
    return (X_new * fit.coefficients).array().exp().matrix();
}

}  // namespace backfire::glm
