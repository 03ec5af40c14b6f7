#include "icm/pca.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "icm/errors.hpp"
#include "icm/rng.hpp"

namespace icm::num {

namespace {

constexpr int kExactLimit = 512;
constexpr int kOversample = 8;
constexpr int kPowerIters = 4;
constexpr std::uint64_t kSketchSeed = 0x9ca0c95517ab3f21ull;

void fix_signs(Matrix& components, Matrix& scores) {
  for (Eigen::Index j = 0; j < components.cols(); ++j) {
    Eigen::Index at = 0;
    components.col(j).cwiseAbs().maxCoeff(&at);
    if (components(at, j) < 0.0) {
      components.col(j) = -components.col(j);
      scores.col(j) = -scores.col(j);
    }
  }
}

Matrix orthonormalize(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

}  // namespace

PcaResult top_principal_components(const Matrix& x, int k) {
  if (k <= 0) throw DomainError("top_principal_components: k must be positive");
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  if (k > std::min(n, m))
    throw DimensionError("top_principal_components: k exceeds min(rows, cols)");
  if (!x.allFinite()) throw NumericError("top_principal_components: non-finite input");

  Matrix xc = x.rowwise() - x.colwise().mean();

  PcaResult res;
  if (std::min(n, m) <= kExactLimit) {
    Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    res.components = svd.matrixV().leftCols(k);
    res.scores = svd.matrixU().leftCols(k) *
                 svd.singularValues().head(k).asDiagonal();
  } else {
    // Randomized range finder: sketch, power iterations with
    // re-orthonormalization, then an exact SVD of the small projection.
    const int width = std::min<Eigen::Index>(k + kOversample, std::min(n, m));
    RngStream rng(kSketchSeed);
    Matrix omega(m, width);
    for (Eigen::Index i = 0; i < m; ++i)
      for (int j = 0; j < width; ++j) omega(i, j) = rng.normal();
    Matrix q = orthonormalize(xc * omega);
    for (int it = 0; it < kPowerIters; ++it) {
      q = orthonormalize(xc.transpose() * q);
      q = orthonormalize(xc * q);
    }
    Matrix b = q.transpose() * xc;  // width x m
    Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    res.components = svd.matrixV().leftCols(k);
    res.scores = (q * svd.matrixU().leftCols(k)) *
                 svd.singularValues().head(k).asDiagonal();
  }
  fix_signs(res.components, res.scores);
  return res;
}

}  // namespace icm::num
