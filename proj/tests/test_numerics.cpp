// Numerical kernel: RNG streams, MLP forward/backward, gradient checking,
// Adam, He initialization, PCA, k-means, OLS plumbing, parallel_for.
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "icm/adam.hpp"
#include "icm/errors.hpp"
#include "icm/gradcheck.hpp"
#include "icm/kmeans.hpp"
#include "icm/mlp.hpp"
#include "icm/parallel.hpp"
#include "icm/pca.hpp"
#include "icm/rng.hpp"

using namespace icm;
using num::RngStream;

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Straight-line scalar re-implementation of the two-hidden-layer forward
// pass (no batch norm), used as an independent oracle for one input row.
double forward_oracle_row(const num::MlpSpec& spec, const num::MlpParams& p,
                          const Vector& row) {
  std::vector<double> a1(static_cast<std::size_t>(spec.hidden1), 0.0);
  for (int i = 0; i < spec.hidden1; ++i) {
    double acc = p.b1(i);
    for (int j = 0; j < spec.input_dim; ++j) acc += p.w1(i, j) * row(j);
    a1[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<double> a2(static_cast<std::size_t>(spec.hidden2), 0.0);
  for (int i = 0; i < spec.hidden2; ++i) {
    double acc = p.b2(i);
    for (int j = 0; j < spec.hidden1; ++j) acc += p.w2(i, j) * a1[static_cast<std::size_t>(j)];
    a2[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
  }
  // Output layer sees [skip-prefix inputs, second hidden activations].
  double out = p.b3(0);
  for (int j = 0; j < spec.skip_prefix; ++j) out += p.w3(0, j) * row(j);
  for (int j = 0; j < spec.hidden2; ++j)
    out += p.w3(0, spec.skip_prefix + j) * a2[static_cast<std::size_t>(j)];
  return out;
}

}  // namespace

TEST_CASE("rng: identical seeds replay bit-exactly") {
  RngStream a(123456789), b(123456789);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

  // Resume from (seed, position) midway through a sequence.
  RngStream c(42);
  for (int i = 0; i < 17; ++i) (void)c.uniform();
  RngStream resumed(c.seed(), c.position());
  for (int i = 0; i < 100; ++i) CHECK(c.next_u64() == resumed.next_u64());
}

TEST_CASE("rng: split streams with different keys are independent") {
  RngStream root(2026);
  RngStream a = root.split(1), b = root.split(2);
  const int n = 100000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sa += x; sb += y; saa += x * x; sbb += y * y; sab += x * y;
  }
  const double ma = sa / n, mb = sb / n;
  const double va = saa / n - ma * ma, vb = sbb / n - mb * mb;
  const double cov = sab / n - ma * mb;
  const double r = cov / std::sqrt(va * vb);
  CHECK(std::abs(r) < 0.01);

  // Splitting does not disturb the parent stream.
  RngStream p(7), q(7);
  (void)p.split(99);
  CHECK(p.next_u64() == q.next_u64());
}

TEST_CASE("rng: basic draw ranges and structure") {
  RngStream rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const std::uint64_t k = rng.uniform_index(7);
    CHECK(k < 7);
  }
  // Box-Muller consumes exactly two uniforms per normal draw.
  const std::uint64_t before = rng.position();
  (void)rng.normal();
  CHECK(rng.position() == before + 2);

  // permutation() returns each index exactly once.
  std::vector<int> perm = rng.permutation(100);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("mlp: all-zero parameters map any input to zero") {
  num::MlpSpec spec;
  spec.input_dim = 5;
  spec.hidden1 = 4;
  spec.hidden2 = 3;
  spec.output_dim = 2;
  num::MlpParams p = num::zeros_like(spec);
  RngStream rng(11);
  Matrix input(6, 5);
  for (int i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  const Matrix out = num::mlp_forward(spec, p, input, /*training=*/false);
  REQUIRE(out.rows() == 6);
  REQUIRE(out.cols() == 2);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp: identity-like single units clamp negative inputs (ReLU)") {
  num::MlpSpec spec;
  spec.input_dim = 1;
  spec.hidden1 = 1;
  spec.hidden2 = 1;
  spec.output_dim = 1;
  num::MlpParams p = num::zeros_like(spec);
  p.w1(0, 0) = 1.0;
  p.w2(0, 0) = 1.0;
  p.w3(0, 0) = 1.0;
  Matrix input(2, 1);
  input << -1.0, 2.5;
  const Matrix out = num::mlp_forward(spec, p, input, false);
  CHECK(out(0, 0) == 0.0);   // negative input dies at the first ReLU
  CHECK(out(1, 0) == 2.5);   // positive input passes straight through
}

TEST_CASE("mlp: random 8->(16,16)->1 forward matches a scalar oracle") {
  num::MlpSpec spec;
  spec.input_dim = 8;
  spec.hidden1 = 16;
  spec.hidden2 = 16;
  spec.output_dim = 1;
  RngStream rng(20260816);
  num::MlpParams p = num::he_init(spec, rng);
  for (int i = 0; i < p.b1.size(); ++i) p.b1(i) = rng.normal(0.0, 0.3);
  for (int i = 0; i < p.b2.size(); ++i) p.b2(i) = rng.normal(0.0, 0.3);

  Matrix input(3, 8);
  for (int i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  const Matrix out = num::mlp_forward(spec, p, input, false);
  for (int r = 0; r < 3; ++r) {
    const double want = forward_oracle_row(spec, p, input.row(r).transpose());
    CHECK(std::abs(out(r, 0) - want) <= 1e-12 * (1.0 + std::abs(want)));
  }

  // Same oracle with the skip connection engaged.
  spec.skip_prefix = 3;
  num::MlpParams ps = num::he_init(spec, rng);
  const Matrix outs = num::mlp_forward(spec, ps, input, false);
  for (int r = 0; r < 3; ++r) {
    const double want = forward_oracle_row(spec, ps, input.row(r).transpose());
    CHECK(std::abs(outs(r, 0) - want) <= 1e-12 * (1.0 + std::abs(want)));
  }
}

TEST_CASE("mlp: inference mode is a pure function") {
  num::MlpSpec spec;
  spec.input_dim = 4;
  spec.hidden1 = 6;
  spec.hidden2 = 5;
  spec.output_dim = 2;
  spec.batch_norm = true;
  RngStream rng(31);
  num::MlpParams p = num::he_init(spec, rng);
  Matrix input(7, 4);
  for (int i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  // One training pass moves the running moments off their initial values.
  (void)num::mlp_forward(spec, p, input, true);
  const Matrix first = num::mlp_forward(spec, p, input, false);
  for (int k = 0; k < 5; ++k) {
    const Matrix again = num::mlp_forward(spec, p, input, false);
    CHECK((again - first).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mlp backward: zero output gradient gives zero everywhere") {
  num::MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden1 = 4;
  spec.hidden2 = 4;
  spec.output_dim = 2;
  spec.batch_norm = true;
  RngStream rng(5);
  num::MlpParams p = num::he_init(spec, rng);
  Matrix input(5, 3);
  for (int i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  num::MlpCache cache;
  (void)num::mlp_forward(spec, p, input, true, &cache);
  const num::MlpGrads g = num::mlp_backward(spec, p, cache, Matrix::Zero(5, 2));
  CHECK(num::flatten_grads(spec, g.params).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.input.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp backward: single linear unit recovers the product rule") {
  // y = w * x through two pass-through hidden units; dL/dw3 carries the
  // activation and dL/dx carries the weight chain.
  num::MlpSpec spec;
  spec.input_dim = 1;
  spec.hidden1 = 1;
  spec.hidden2 = 1;
  spec.output_dim = 1;
  num::MlpParams p = num::zeros_like(spec);
  p.w1(0, 0) = 1.0;
  p.w2(0, 0) = 1.0;
  p.w3(0, 0) = 2.0;
  Matrix input(1, 1);
  input << 3.0;
  num::MlpCache cache;
  const Matrix out = num::mlp_forward(spec, p, input, true, &cache);
  REQUIRE(out(0, 0) == 6.0);
  const num::MlpGrads g = num::mlp_backward(spec, p, cache, Matrix::Ones(1, 1));
  CHECK(g.params.w3(0, 0) == 3.0);  // dL/dw3 = activation = x
  CHECK(g.input(0, 0) == 2.0);      // dL/dx = w3 * w2 * w1 = 2
}

TEST_CASE("mlp backward: finite differences across spec variants") {
  // Parameters AND inputs, with/without batch norm, with/without skip.
  RngStream rng(8881);
  for (const bool bn : {false, true}) {
    for (const int skip : {0, 2}) {
      num::MlpSpec spec;
      spec.input_dim = 5;
      spec.hidden1 = 6;
      spec.hidden2 = 4;
      spec.output_dim = 1;
      spec.batch_norm = bn;
      spec.skip_prefix = skip;
      num::MlpParams params = num::he_init(spec, rng);
      // Bias/shift randomization keeps pre-activations away from the ReLU
      // kink that exact zeros would park them on.
      for (int i = 0; i < params.b1.size(); ++i) params.b1(i) = rng.normal(0.0, 0.5);
      for (int i = 0; i < params.b2.size(); ++i) params.b2(i) = rng.normal(0.0, 0.5);
      if (bn) {
        for (int i = 0; i < spec.hidden1; ++i) {
          params.bn1.scale(i) = 1.0 + 0.3 * rng.normal();
          params.bn1.shift(i) = 0.3 * rng.normal();
        }
        for (int i = 0; i < spec.hidden2; ++i) {
          params.bn2.scale(i) = 1.0 + 0.3 * rng.normal();
          params.bn2.shift(i) = 0.3 * rng.normal();
        }
      }
      Matrix input(6, 5);
      for (int i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
      Matrix targets(6, 1);
      for (int i = 0; i < 6; ++i) targets(i, 0) = rng.normal();

      // Input-side check: loss as a function of the flattened input batch.
      // With batch norm the hidden biases are structurally dead (the batch
      // mean subtraction removes them), so the parameter-side check here
      // sticks to the input gradient; the packed-parameter variants are
      // exercised by the dedicated gradient suite.
      const num::LossFn input_loss = [&](const Vector& flat) {
        Matrix in(6, 5);
        for (int i = 0; i < in.size(); ++i) in.data()[i] = flat(i);
        num::MlpParams local = params;
        num::MlpCache cache;
        const Matrix out = num::mlp_forward(spec, local, in, true, &cache);
        const Matrix diff = out - targets;
        num::ValueGrad vg;
        vg.value = 0.5 * diff.squaredNorm();
        const num::MlpGrads g = num::mlp_backward(spec, local, cache, diff);
        vg.grad.resize(in.size());
        for (int i = 0; i < in.size(); ++i) vg.grad(i) = g.input.data()[i];
        return vg;
      };
      Vector at(input.size());
      for (int i = 0; i < input.size(); ++i) at(i) = input.data()[i];
      CHECK(num::gradient_check(input_loss, at) <= 1e-5);

      // Parameter-side check without batch norm (all parameters live).
      if (!bn) {
        const num::LossFn param_loss = [&](const Vector& flat) {
          num::MlpParams local = params;
          num::unflatten(spec, flat, local);
          num::MlpCache cache;
          const Matrix out = num::mlp_forward(spec, local, input, true, &cache);
          const Matrix diff = out - targets;
          num::ValueGrad vg;
          vg.value = 0.5 * diff.squaredNorm();
          const num::MlpGrads g = num::mlp_backward(spec, local, cache, diff);
          vg.grad = num::flatten_grads(spec, g.params);
          return vg;
        };
        CHECK(num::gradient_check(param_loss, num::flatten(spec, params)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("gradient_check: quadratic, planted bug, tolerance floor") {
  const num::LossFn quadratic = [](const Vector& p) {
    num::ValueGrad vg;
    vg.value = 0.5 * p.squaredNorm();
    vg.grad = p;
    return vg;
  };
  RngStream rng(77);
  Vector at(6);
  for (int i = 0; i < 6; ++i) at(i) = rng.normal();
  CHECK(num::gradient_check(quadratic, at) <= 1e-8);

  // One doubled coordinate must be flagged loudly.
  const num::LossFn corrupted = [](const Vector& p) {
    num::ValueGrad vg;
    vg.value = 0.5 * p.squaredNorm();
    vg.grad = p;
    vg.grad(2) *= 2.0;
    return vg;
  };
  CHECK(num::gradient_check(corrupted, at) > 0.3);

  const num::LossFn bad = [](const Vector& p) {
    num::ValueGrad vg;
    vg.value = std::numeric_limits<double>::quiet_NaN();
    vg.grad = p;
    return vg;
  };
  CHECK_THROWS_AS((void)num::gradient_check(bad, at), NumericError);
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
  num::AdamState st = num::make_adam(4);
  Vector params(4);
  params << 1.0, -2.0, 0.5, 3.0;
  const Vector before = params;
  num::adam_step(st, params, Vector::Zero(4));
  CHECK((params - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first step moves by about step_size in the gradient sign") {
  num::AdamConfig cfg;
  cfg.step_size = 0.01;
  num::AdamState st = num::make_adam(3, cfg);
  Vector params = Vector::Zero(3);
  Vector grad(3);
  grad << 4.0, -0.003, 1e5;
  num::adam_step(st, params, grad);
  for (int i = 0; i < 3; ++i) {
    // Bias-corrected first step: alpha * g / (|g| + eps) = alpha * sign(g).
    CHECK(params(i) * grad(i) > 0.0);
    CHECK(std::abs(params(i)) == doctest::Approx(cfg.step_size).epsilon(1e-4));
  }
}

TEST_CASE("adam: 200 steps minimize a shifted quadratic") {
  num::AdamConfig cfg;
  cfg.step_size = 0.05;
  num::AdamState st = num::make_adam(1, cfg);
  Vector p = Vector::Zero(1);
  for (int i = 0; i < 200; ++i) {
    // Maximize -(p-3)^2/2: ascent gradient is -(p-3).
    Vector g(1);
    g(0) = -(p(0) - 3.0);
    num::adam_step(st, p, g);
  }
  CHECK(std::abs(p(0) - 3.0) < 0.1);
}

TEST_CASE("adam: non-finite gradients are rejected, finite stay finite") {
  num::AdamState st = num::make_adam(2);
  Vector p = Vector::Zero(2);
  Vector g(2);
  g << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(num::adam_step(st, p, g), NumericError);

  num::AdamState st2 = num::make_adam(2);
  RngStream rng(3);
  for (int i = 0; i < 500; ++i) {
    Vector grad(2);
    grad << rng.normal(0, 1e6), rng.normal(0, 1e-9);
    num::adam_step(st2, p, grad);
    REQUIRE(p.allFinite());
  }
}

TEST_CASE("he_init: variance, determinism, zero biases") {
  num::MlpSpec spec;
  spec.input_dim = 512;
  spec.hidden1 = 64;
  spec.hidden2 = 8;
  spec.output_dim = 1;
  spec.batch_norm = true;
  RngStream rng(606);
  const num::MlpParams p = num::he_init(spec, rng);

  // First layer fan-in 512: weight variance within 20% of 2/512 over the
  // 64*512 = 32768 draws.
  const double n = static_cast<double>(p.w1.size());
  const double mean = p.w1.sum() / n;
  const double var = (p.w1.array() - mean).square().sum() / n;
  const double want = 2.0 / 512.0;
  CHECK(var > 0.8 * want);
  CHECK(var < 1.2 * want);

  CHECK(p.b1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b2.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b3.cwiseAbs().maxCoeff() == 0.0);
  CHECK((p.bn1.scale.array() == 1.0).all());
  CHECK((p.bn1.shift.array() == 0.0).all());

  RngStream rng2(606);
  const num::MlpParams q = num::he_init(spec, rng2);
  CHECK((num::flatten(spec, p) - num::flatten(spec, q)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pca: exact rank-1 recovery") {
  RngStream rng(12);
  Vector u(40), v(9);
  for (int i = 0; i < 40; ++i) u(i) = rng.normal();
  for (int i = 0; i < 9; ++i) v(i) = rng.normal();
  // Center u so column centering does not disturb the construction.
  u.array() -= u.mean();
  const Matrix x = u * v.transpose();
  const num::PcaResult r = num::top_principal_components(x, 1);
  const double cosine = std::abs(r.components.col(0).dot(v.normalized()));
  CHECK(cosine == doctest::Approx(1.0).epsilon(1e-10));
  const Matrix recon = r.scores * r.components.transpose();
  CHECK((x - recon).norm() < 1e-8);
}

TEST_CASE("pca: orthogonal two-block structure is separated") {
  // Rows alternate between two orthogonal directions; the top-2 component
  // subspace must match their span to machine precision.
  Matrix x(20, 6);
  x.setZero();
  for (int i = 0; i < 20; ++i) {
    const double s = (i / 2) % 2 == 0 ? 1.0 : -1.0;
    if (i % 2 == 0) {
      x(i, 0) = 3.0 * s;
      x(i, 1) = 3.0 * s;
    } else {
      x(i, 4) = 1.0 * s;
      x(i, 5) = -1.0 * s;
    }
  }
  const num::PcaResult r = num::top_principal_components(x, 2);
  // Both recovered components must lie inside the true span.
  Matrix basis(6, 2);
  basis.setZero();
  basis(0, 0) = basis(1, 0) = 1.0 / std::sqrt(2.0);
  basis(4, 1) = 1.0 / std::sqrt(2.0);
  basis(5, 1) = -1.0 / std::sqrt(2.0);
  for (int k = 0; k < 2; ++k) {
    const Vector c = r.components.col(k);
    const Vector proj = basis * (basis.transpose() * c);
    CHECK((c - proj).norm() < 1e-6);  // principal angle < 1e-6
  }
}

TEST_CASE("pca: agrees with a dense eigendecomposition oracle (50x30)") {
  RngStream rng(47);
  Matrix x(50, 30);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const int k = 5;
  const num::PcaResult r = num::top_principal_components(x, k);

  Matrix centered = x;
  for (int j = 0; j < 30; ++j) centered.col(j).array() -= centered.col(j).mean();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered.transpose() * centered);
  // Eigenvalues ascend; take the trailing k columns as the oracle basis.
  const Matrix oracle = eig.eigenvectors().rightCols(k);
  for (int j = 0; j < k; ++j) {
    const Vector c = r.components.col(j);
    const Vector proj = oracle * (oracle.transpose() * c);
    CHECK((c - proj).norm() < 1e-6);
    // Per-component angle against the matching oracle axis (reversed order).
    const double cosine = std::abs(c.dot(oracle.col(k - 1 - j)));
    CHECK(cosine == doctest::Approx(1.0).epsilon(1e-8));
  }

  // Sign convention: each component's largest-magnitude entry is positive.
  for (int j = 0; j < k; ++j) {
    int arg = 0;
    r.components.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(r.components(arg, j) > 0.0);
  }
}

TEST_CASE("pca: reconstruction error non-increasing in K") {
  RngStream rng(99);
  Matrix x(40, 25);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Matrix centered = x;
  for (int j = 0; j < 25; ++j) centered.col(j).array() -= centered.col(j).mean();
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 8; ++k) {
    const num::PcaResult r = num::top_principal_components(x, k);
    const double err = (centered - r.scores * r.components.transpose()).norm();
    CHECK(err <= prev + 1e-9);
    prev = err;
  }
}

TEST_CASE("kmeans: separated blobs are recovered exactly") {
  RngStream rng(2024);
  const int per = 40;
  Matrix pts(3 * per, 2);
  std::vector<int> truth(3 * static_cast<std::size_t>(per));
  const double centers[3][2] = {{0.0, 0.0}, {30.0, 0.0}, {0.0, 30.0}};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per; ++i) {
      const int row = c * per + i;
      pts(row, 0) = centers[c][0] + rng.normal();
      pts(row, 1) = centers[c][1] + rng.normal();
      truth[static_cast<std::size_t>(row)] = c;
    }
  const num::KmeansResult r = num::kmeans(pts, 3, rng);
  CHECK(num::adjusted_rand_index(r.labels, truth) == doctest::Approx(1.0));
}

TEST_CASE("kmeans: degenerate inputs") {
  Matrix same = Matrix::Constant(10, 3, 1.5);
  RngStream rng(1);
  const num::KmeansResult one = num::kmeans(same, 1, rng);
  for (int i = 0; i < 10; ++i) CHECK(one.labels[static_cast<std::size_t>(i)] == 0);

  // One-hot rows: three exactly-separated point groups.
  Matrix onehot(9, 3);
  onehot.setZero();
  std::vector<int> truth(9);
  for (int i = 0; i < 9; ++i) {
    onehot(i, i % 3) = 1.0;
    truth[static_cast<std::size_t>(i)] = i % 3;
  }
  const num::KmeansResult r = num::kmeans(onehot, 3, rng);
  CHECK(num::adjusted_rand_index(r.labels, truth) == doctest::Approx(1.0));
  CHECK(r.within_ss == doctest::Approx(0.0));

  CHECK_THROWS_AS((void)num::kmeans(same, 0, rng), DomainError);
}

TEST_CASE("adjusted_rand_index: reference values") {
  const std::vector<int> a{0, 0, 1, 1};
  CHECK(num::adjusted_rand_index(a, a) == doctest::Approx(1.0));
  const std::vector<int> relabeled{1, 1, 0, 0};
  CHECK(num::adjusted_rand_index(a, relabeled) == doctest::Approx(1.0));
  const std::vector<int> half{0, 1, 0, 1};
  CHECK(num::adjusted_rand_index(a, half) < 0.5);
}

TEST_CASE("parallel_for: schedule-independent results and error propagation") {
  const int n = 1000;
  std::vector<double> serial(static_cast<std::size_t>(n)), wide(static_cast<std::size_t>(n));
  const auto fill = [](std::vector<double>& out) {
    return [&out](int i) {
      RngStream rng(static_cast<std::uint64_t>(i) + 17);
      out[static_cast<std::size_t>(i)] = rng.normal();
    };
  };
  num::parallel_for(n, 1, fill(serial));
  num::parallel_for(n, 8, fill(wide));
  for (int i = 0; i < n; ++i)
    CHECK(serial[static_cast<std::size_t>(i)] == wide[static_cast<std::size_t>(i)]);

  CHECK_THROWS_AS(num::parallel_for(16, 4,
                                    [](int i) {
                                      if (i == 7) throw NumericError("boom");
                                    }),
                  NumericError);
}

TEST_CASE("log(2*pi) constant used across closed forms") {
  CHECK(std::log(kTwoPi) == doctest::Approx(1.8378770664093453).epsilon(1e-15));
}
