#pragma once

#include <vector>

#include "icm/la.hpp"
#include "icm/rng.hpp"

namespace icm::num {

struct KmeansResult {
  std::vector<int> labels;  // one per input row
  Matrix centers;           // k by dim
  double within_ss = 0.0;
};

// Lloyd's algorithm with k-means++ seeding; the best of `restarts` runs by
// within-cluster sum of squares wins.  Ties in assignment go to the lowest
// cluster index, so results are deterministic given the stream.
KmeansResult kmeans(const Matrix& points, int k, RngStream& rng, int restarts = 10,
                    int max_iter = 100);

// Adjusted Rand index between two labelings of the same items; 1 for a
// perfect match, about 0 for independent labelings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace icm::num
