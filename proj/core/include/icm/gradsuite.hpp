#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace icm::num {

// One row of the analytic-vs-finite-difference verification suite.
struct GradSuiteRow {
  std::string op;
  int instances = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Checks every differentiable operation (MLP forward/backward with batch
// norm and skip connection, binomial log-pmf, ordered-categorical log-pmf,
// group-lasso prior, reparameterized variational objective, ratio loss)
// against central finite differences on `instances` random instances each.
// An op passes when its max relative error stays within `tolerance`.
std::vector<GradSuiteRow> run_gradient_suite(int instances, double tolerance,
                                             std::uint64_t seed);

bool gradient_suite_passed(const std::vector<GradSuiteRow>& rows);

}  // namespace icm::num
