#include "icm/kmeans.hpp"

#include <limits>

#include "icm/errors.hpp"

namespace icm::num {

namespace {

double sq_dist(const Matrix& points, Eigen::Index i, const Matrix& centers,
               Eigen::Index c) {
  return (points.row(i) - centers.row(c)).squaredNorm();
}

Matrix seed_plus_plus(const Matrix& points, int k, RngStream& rng) {
  const Eigen::Index n = points.rows();
  Matrix centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.uniform_index(n)));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(points, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      // Sample proportional to squared distance to the nearest center.
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(n));
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), sq_dist(points, i, centers, c));
  }
  return centers;
}

KmeansResult lloyd(const Matrix& points, int k, Matrix centers, int max_iter) {
  const Eigen::Index n = points.rows();
  KmeansResult res;
  res.labels.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.labels[static_cast<std::size_t>(i)] != best) {
        res.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Reseed an empty cluster at the point farthest from its center.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d =
              sq_dist(points, i, centers, res.labels[static_cast<std::size_t>(i)]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }
  res.centers = std::move(centers);
  res.within_ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    res.within_ss += sq_dist(points, i, res.centers, res.labels[static_cast<std::size_t>(i)]);
  return res;
}

}  // namespace

KmeansResult kmeans(const Matrix& points, int k, RngStream& rng, int restarts,
                    int max_iter) {
  if (k <= 0) throw DomainError("kmeans: k must be positive");
  if (points.rows() < k)
    throw DimensionError("kmeans: fewer points than clusters");
  if (restarts <= 0) throw DomainError("kmeans: restarts must be positive");

  KmeansResult best;
  best.within_ss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    RngStream run = rng.split(static_cast<std::uint64_t>(r));
    KmeansResult cur = lloyd(points, k, seed_plus_plus(points, k, run), max_iter);
    if (cur.within_ss < best.within_ss) best = std::move(cur);
  }
  return best;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw DimensionError("adjusted_rand_index: labelings differ in length");
  if (a.empty()) throw DomainError("adjusted_rand_index: empty labelings");
  int ka = 0, kb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0)
      throw DomainError("adjusted_rand_index: labels must be nonnegative");
    ka = std::max(ka, a[i] + 1);
    kb = std::max(kb, b[i] + 1);
  }
  Matrix table = Matrix::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) table(a[i], b[i]) += 1.0;
  auto choose2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double sum_cells = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) sum_cells += choose2(table(i, j));
  double sum_rows = 0.0, sum_cols = 0.0;
  for (int i = 0; i < ka; ++i) sum_rows += choose2(table.row(i).sum());
  for (int j = 0; j < kb; ++j) sum_cols += choose2(table.col(j).sum());
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both labelings are single-cluster
  return (sum_cells - expected) / (max_index - expected);
}

}  // namespace icm::num
