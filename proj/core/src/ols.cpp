#include "icm/ols.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <string>

#include "icm/errors.hpp"
#include "icm/specfun.hpp"

namespace icm::num {

OlsResult ols_ttest(const Vector& y, const Matrix& design) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (y.size() != n) throw DimensionError("ols_ttest: y length mismatch");
  if (n <= p)
    throw DimensionError("ols_ttest: need more observations than coefficients");
  if (!y.allFinite() || !design.allFinite())
    throw NumericError("ols_ttest: non-finite input");

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    // The first column the pivoting left out of the basis is the culprit.
    const auto perm = qr.colsPermutation().indices();
    const int offender = perm(qr.rank());
    throw SingularityError(
        "ols_ttest: design column " + std::to_string(offender) + " is linearly dependent",
        offender);
  }

  OlsResult res;
  res.coef = qr.solve(y);
  const Vector resid = y - design * res.coef;
  res.rss = resid.squaredNorm();
  res.dof = static_cast<double>(n - p);
  const double sigma2 = res.rss / res.dof;

  // (X^T X)^{-1} from the pivoted factorization: P R^{-1} R^{-T} P^T.
  const Matrix r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  Matrix xtx_inv = rinv * rinv.transpose();
  const auto perm = qr.colsPermutation();
  xtx_inv = perm * xtx_inv * perm.transpose();

  res.std_err.resize(p);
  res.t_stat.resize(p);
  res.p_value.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    res.std_err(j) = se;
    if (se > 0.0) {
      res.t_stat(j) = res.coef(j) / se;
    } else {
      // Zero-noise exact fit: the statistic is infinite, p collapses to 0.
      res.t_stat(j) = res.coef(j) == 0.0
                          ? 0.0
                          : std::copysign(std::numeric_limits<double>::infinity(),
                                          res.coef(j));
    }
    res.p_value(j) = res.t_stat(j) == 0.0 && se == 0.0
                         ? 1.0
                         : student_t_two_sided_p(res.t_stat(j), res.dof);
  }
  return res;
}

}  // namespace icm::num
