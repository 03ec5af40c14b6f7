#pragma once

#include <functional>

#include "icm/la.hpp"

namespace icm::num {

struct ValueGrad {
  double value = 0.0;
  Vector grad;
};

using LossFn = std::function<ValueGrad(const Vector&)>;

// Central-difference check of an analytic gradient.  Returns the maximum
// relative error max_i |a_i - n_i| / max(floor, |a_i| + |n_i|) over all
// coordinates, where floor = max(1e-8, 1e-3 * ||a||_inf) absorbs the
// difference quotient's round-off noise on zero-gradient coordinates.
// Throws NumericError if any evaluation is non-finite.
double gradient_check(const LossFn& loss, const Vector& at, double step = 1e-6);

}  // namespace icm::num
