#pragma once

#include "icm/la.hpp"

namespace icm::num {

struct OlsResult {
  Vector coef;
  Vector std_err;
  Vector t_stat;
  Vector p_value;  // two-sided
  double dof = 0.0;
  double rss = 0.0;
};

// Least squares of y on the given design matrix (include an intercept
// column yourself if wanted), with per-coefficient t statistics and
// two-sided p-values.  Throws SingularityError naming the first dependent
// column when the design is rank deficient, DimensionError when there are
// no residual degrees of freedom.
OlsResult ols_ttest(const Vector& y, const Matrix& design);

}  // namespace icm::num
