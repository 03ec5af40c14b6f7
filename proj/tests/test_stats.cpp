// Classical statistics: OLS t-tests and the special functions backing
// p-value computation.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "icm/errors.hpp"
#include "icm/ols.hpp"
#include "icm/rng.hpp"
#include "icm/specfun.hpp"

using namespace icm;
using num::RngStream;

namespace {

// Kolmogorov-Smirnov statistic against Uniform(0,1).
double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(p[i] - lo), std::abs(p[i] - hi)));
  }
  return d;
}

}  // namespace

TEST_CASE("ols: zero-noise linear relation is recovered exactly") {
  RngStream rng(51);
  const int n = 40;
  Matrix design(n, 2);
  design.col(0).setOnes();
  for (int i = 0; i < n; ++i) design(i, 1) = rng.normal();
  const Vector y = 3.0 * design.col(1) + Vector::Constant(n, 0.5);
  const num::OlsResult fit = num::ols_ttest(y, design);
  CHECK(fit.coef(1) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(fit.coef(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(fit.p_value(1) < 1e-12);
}

TEST_CASE("ols: ten-point dataset matches hand-computed normal equations") {
  // Fixed ten points; the oracle computes (X^T X)^{-1} X^T y and the
  // standard errors from first principles with an explicit 2x2 inverse.
  const double xs[10] = {0.1, 0.9, 1.7, 2.2, 3.1, 3.8, 4.4, 5.0, 5.9, 6.3};
  const double ys[10] = {1.3, 2.9, 2.1, 4.4, 4.1, 5.6, 5.2, 7.0, 6.8, 8.1};
  Matrix design(10, 2);
  Vector y(10);
  for (int i = 0; i < 10; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = xs[i];
    y(i) = ys[i];
  }

  // Oracle: normal equations by scalar arithmetic.
  double s1 = 10.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
  for (int i = 0; i < 10; ++i) {
    sx += xs[i];
    sxx += xs[i] * xs[i];
    sy += ys[i];
    sxy += xs[i] * ys[i];
  }
  const double det = s1 * sxx - sx * sx;
  const double b0 = (sxx * sy - sx * sxy) / det;
  const double b1 = (s1 * sxy - sx * sy) / det;
  double rss = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double r = ys[i] - b0 - b1 * xs[i];
    rss += r * r;
  }
  const double sigma2 = rss / 8.0;  // n - p = 10 - 2
  const double se0 = std::sqrt(sigma2 * sxx / det);
  const double se1 = std::sqrt(sigma2 * s1 / det);

  const num::OlsResult fit = num::ols_ttest(y, design);
  CHECK(std::abs(fit.coef(0) - b0) < 1e-10);
  CHECK(std::abs(fit.coef(1) - b1) < 1e-10);
  CHECK(std::abs(fit.std_err(0) - se0) < 1e-10);
  CHECK(std::abs(fit.std_err(1) - se1) < 1e-10);
  CHECK(fit.dof == doctest::Approx(8.0));
}

TEST_CASE("ols: null p-values are uniform over 1000 replicates") {
  RngStream rng(8675309);
  std::vector<double> pvals;
  pvals.reserve(1000);
  const int n = 30;
  for (int rep = 0; rep < 1000; ++rep) {
    Matrix design(n, 3);
    Vector y(n);
    design.col(0).setOnes();
    for (int i = 0; i < n; ++i) {
      design(i, 1) = rng.normal();
      design(i, 2) = rng.normal();
      y(i) = rng.normal();
    }
    const num::OlsResult fit = num::ols_ttest(y, design);
    pvals.push_back(fit.p_value(1));
    CHECK(fit.p_value(1) >= 0.0);
    CHECK(fit.p_value(1) <= 1.0);
  }
  CHECK(ks_uniform(pvals) < 0.05);
}

TEST_CASE("ols: rank deficiency names the offending column") {
  RngStream rng(4);
  const int n = 20;
  Matrix design(n, 4);
  design.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    design(i, 1) = rng.normal();
    design(i, 3) = rng.normal();
  }
  design.col(2) = 2.0 * design.col(1);  // exact linear dependence
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = rng.normal();
  try {
    (void)num::ols_ttest(y, design);
    FAIL("expected SingularityError");
  } catch (const SingularityError& e) {
    // Either member of the dependent pair is a legitimate culprit.
    CHECK((e.column() == 1 || e.column() == 2));
    CHECK(std::string(e.what()).find("column") != std::string::npos);
  }
}

TEST_CASE("ols: t-statistics invariant to affine covariate rescaling") {
  RngStream rng(90);
  const int n = 50;
  Matrix design(n, 3);
  design.col(0).setOnes();
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    design(i, 1) = rng.normal();
    design(i, 2) = rng.normal();
    y(i) = 0.4 * design(i, 1) + rng.normal();
  }
  const num::OlsResult base = num::ols_ttest(y, design);

  Matrix scaled = design;
  scaled.col(1) *= 7.25;  // pure rescaling: same fitted subspace
  const num::OlsResult after = num::ols_ttest(y, scaled);
  CHECK(after.t_stat(1) == doctest::Approx(base.t_stat(1)).epsilon(1e-10));
  CHECK(after.p_value(1) == doctest::Approx(base.p_value(1)).epsilon(1e-10));
  CHECK(after.coef(1) == doctest::Approx(base.coef(1) / 7.25).epsilon(1e-10));

  // Affine shift of a covariate only reshuffles the intercept.
  Matrix shifted = design;
  shifted.col(2).array() += 11.0;
  const num::OlsResult after2 = num::ols_ttest(y, shifted);
  CHECK(after2.t_stat(2) == doctest::Approx(base.t_stat(2)).epsilon(1e-10));
  CHECK(after2.p_value(2) == doctest::Approx(base.p_value(2)).epsilon(1e-10));
}

TEST_CASE("ols: shape and degrees-of-freedom guards") {
  Vector y(3);
  y << 1, 2, 3;
  Matrix x(3, 3);
  x.setIdentity();
  CHECK_THROWS_AS((void)num::ols_ttest(y, x), DimensionError);  // n <= p
  Matrix x2(4, 1);
  x2.setOnes();
  CHECK_THROWS_AS((void)num::ols_ttest(y, x2), DimensionError);  // length mismatch
}

TEST_CASE("student t p-values: table values and limits") {
  // Two-sided critical value at alpha = 0.05 with 10 dof is 2.2281.
  CHECK(num::student_t_two_sided_p(2.228139, 10.0) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(num::student_t_two_sided_p(0.0, 7.0) == doctest::Approx(1.0));
  CHECK(num::student_t_two_sided_p(1e300, 5.0) == doctest::Approx(0.0));
  // Symmetry in the statistic.
  CHECK(num::student_t_two_sided_p(-1.7, 12.0) ==
        doctest::Approx(num::student_t_two_sided_p(1.7, 12.0)).epsilon(1e-14));
}

TEST_CASE("normal cdf and quantile are mutual inverses") {
  CHECK(num::normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(num::normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
  // Round-tripping x -> cdf -> quantile is well conditioned in the left tail
  // (the cdf keeps relative precision near 0) but not the right: near p = 1
  // one ulp of p moves x by ulp/pdf(x), which passes 1e-9 * |x| around x ~ 6.
  // The grid therefore stops at 5.5 on the right.
  for (const double x : {-8.0, -3.2, -0.7, 0.0, 0.4, 2.9, 5.5}) {
    CHECK(num::normal_quantile(num::normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  }
  for (const double p : {1e-12, 1e-6, 0.025, 0.5, 0.9, 1.0 - 1e-9}) {
    CHECK(num::normal_cdf(num::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("chi-square(1): survival function, quantile, median") {
  // The chi2(1) median constant used by genomic control.
  CHECK(num::chi2_1_sf(num::kChi2OneMedian) == doctest::Approx(0.5).epsilon(1e-12));
  for (const double p : {1e-10, 1e-4, 0.01, 0.3, 0.77, 0.999}) {
    CHECK(num::chi2_1_sf(num::chi2_1_from_pvalue(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  // chi2(1) sf relates to the normal tail: sf(x) = 2 * (1 - Phi(sqrt(x))).
  for (const double x : {0.13, 1.0, 4.0, 9.0}) {
    const double want = 2.0 * (1.0 - num::normal_cdf(std::sqrt(x)));
    CHECK(num::chi2_1_sf(x) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("regularized incomplete beta: closed forms and symmetry") {
  for (const double x : {0.05, 0.3, 0.5, 0.9}) {
    CHECK(num::reg_incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    // I_x(2,2) = x^2 (3 - 2x).
    CHECK(num::reg_incomplete_beta(2.0, 2.0, x) ==
          doctest::Approx(x * x * (3.0 - 2.0 * x)).epsilon(1e-12));
    // Reflection identity.
    CHECK(num::reg_incomplete_beta(2.5, 1.7, x) ==
          doctest::Approx(1.0 - num::reg_incomplete_beta(1.7, 2.5, 1.0 - x)).epsilon(1e-10));
  }
}
