#pragma once

#include "icm/la.hpp"

namespace icm::num {

struct PcaResult {
  Matrix components;  // cols-of-x by k, orthonormal columns
  Matrix scores;      // rows-of-x by k, projections of centered rows
};

// Top-k principal components of the rows of `x` after column centering.
// Small problems (min dimension <= 512) use an exact thin SVD; larger ones
// use randomized subspace iteration with a fixed internal seed, so results
// are deterministic.  Each component's sign is fixed so its largest-
// magnitude entry is positive.
PcaResult top_principal_components(const Matrix& x, int k);

}  // namespace icm::num
