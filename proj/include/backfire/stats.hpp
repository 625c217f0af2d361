#pragma once

namespace backfire::stats {

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

double normal_cdf(double z);
double student_t_cdf(double t, double df);
/// Two-sided p-value P(|T| > |t|).
double student_t_two_sided(double t, double df);
double student_t_quantile(double p, double df);

/// Upper tail of chi-square with one degree of freedom.
double chi2_1_sf(double x);

inline constexpr double kZ975 = 1.959963984540054;

}  // namespace backfire::stats
