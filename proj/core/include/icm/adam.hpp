#pragma once

#include <cstdint>
#include <vector>

#include "icm/la.hpp"

namespace icm::num {

struct AdamConfig {
  double step_size = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators for one parameter block.  `step` is the
// global step count of the block, shared by all rows even when only a
// subset of rows is touched in a given step.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  Vector m;
  Vector v;
};

AdamState make_adam(Eigen::Index n, const AdamConfig& config = {});

// In-place ascent step: params += step_size * mhat / (sqrt(vhat) + eps).
// Pass the gradient of the objective being maximized.  Throws NumericError
// on non-finite gradients.
void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Vector& grad);

// Row-sparse variant for (rows x cols) parameter matrices where one update
// touches a subset of rows.  The state vector is laid out row-major over
// the full matrix; untouched rows keep their moments.
void adam_step_rows(AdamState& state, Matrix& params, const std::vector<int>& rows,
                    const Matrix& grad_rows);

}  // namespace icm::num
