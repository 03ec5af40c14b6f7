#pragma once

namespace icm::num {

// Regularized incomplete beta I_x(a, b), evaluated by continued fraction.
double reg_incomplete_beta(double a, double b, double x);

// Two-sided p-value of a Student-t statistic with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

double normal_cdf(double x);

// Inverse standard normal CDF (rational approximation plus one Halley
// refinement); accurate over p in (0, 1) down to denormal tails.
double normal_quantile(double p);

// Survival function of the 1-dof chi-squared distribution.
double chi2_1_sf(double x);

// 1-dof chi-squared statistic whose upper-tail probability equals `p`,
// computed via the normal quantile at p/2 so tiny p keep full precision.
double chi2_1_from_pvalue(double p);

// Median of the 1-dof chi-squared distribution.
inline constexpr double kChi2OneMedian = 0.4549364231195724;

}  // namespace icm::num
