#include "icm/gradcheck.hpp"

#include <cmath>
#include <string>

#include "icm/errors.hpp"

namespace icm::num {

double gradient_check(const LossFn& loss, const Vector& at, double step) {
  if (!(step > 0.0)) throw DomainError("gradient_check: step must be positive");
  const ValueGrad center = loss(at);
  if (!std::isfinite(center.value) || !center.grad.allFinite())
    throw NumericError("gradient_check: non-finite loss or gradient at center");
  if (center.grad.size() != at.size())
    throw DimensionError("gradient_check: gradient length mismatch");

  // The difference quotient carries round-off noise of order ulp(loss)/step,
  // so a coordinate whose true gradient is zero (a dead ReLU path, say) reads
  // back a tiny spurious value.  Judging it against a denominator floor tied
  // to the gradient's overall scale keeps such coordinates from dominating
  // while leaving every coordinate that carries real signal on the strict
  // relative test.
  const double scale_floor =
      std::max(1e-8, 1e-3 * center.grad.cwiseAbs().maxCoeff());

  double worst = 0.0;
  Vector x = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    x(i) = at(i) + step;
    const double up = loss(x).value;
    x(i) = at(i) - step;
    const double down = loss(x).value;
    x(i) = at(i);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("gradient_check: non-finite loss at coordinate " +
                         std::to_string(i));
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = center.grad(i);
    const double rel =
        std::abs(analytic - numeric) /
        std::max(scale_floor, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace icm::num
