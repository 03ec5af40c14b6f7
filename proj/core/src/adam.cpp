#include "icm/adam.hpp"

#include <cmath>
#include <string>

#include "icm/errors.hpp"

namespace icm::num {

AdamState make_adam(Eigen::Index n, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  return s;
}

void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Vector& grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size())
    throw DimensionError("adam_step: size mismatch with optimizer state");
  if (!grad.allFinite()) throw NumericError("adam_step: non-finite gradient");
  ++state.step;
  const auto& c = state.config;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v.array() + (1.0 - c.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  params.array() += c.step_size * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + c.eps);
}

void adam_step_rows(AdamState& state, Matrix& params, const std::vector<int>& rows,
                    const Matrix& grad_rows) {
  const Eigen::Index cols = params.cols();
  if (state.m.size() != params.size())
    throw DimensionError("adam_step_rows: state sized for a different matrix");
  if (grad_rows.rows() != static_cast<Eigen::Index>(rows.size()) || grad_rows.cols() != cols)
    throw DimensionError("adam_step_rows: gradient shape mismatch");
  if (!grad_rows.allFinite()) throw NumericError("adam_step_rows: non-finite gradient");
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= params.rows())
      throw DimensionError("adam_step_rows: row index " + std::to_string(r) +
                           " out of range");
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Eigen::Index k = static_cast<Eigen::Index>(r) * cols + j;
      const double g = grad_rows(static_cast<Eigen::Index>(i), j);
      state.m(k) = c.beta1 * state.m(k) + (1.0 - c.beta1) * g;
      state.v(k) = c.beta2 * state.v(k) + (1.0 - c.beta2) * g * g;
      params(r, j) += c.step_size * (state.m(k) / bc1) /
                      (std::sqrt(state.v(k) / bc2) + c.eps);
    }
  }
}

}  // namespace icm::num
