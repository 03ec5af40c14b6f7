#pragma once

#include <Eigen/Dense>

namespace icm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace icm
