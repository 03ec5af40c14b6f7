#include "icm/mlp.hpp"

#include <cmath>

#include "icm/errors.hpp"

namespace icm::num {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix out = x * w.transpose();
  out.rowwise() += b.transpose();
  return out;
}

// Normalizes `a` per feature.  Training mode uses minibatch moments and
// advances the running averages; inference mode reads the running values.
Matrix batch_norm_forward(const Matrix& a, BatchNormParams& bn, bool training,
                          BnCache* cache) {
  const auto rows = a.rows();
  Vector mean, var;
  if (training) {
    mean = a.colwise().mean();
    var = (a.rowwise() - mean.transpose()).array().square().colwise().mean();
    bn.running_mean = kBnMomentum * bn.running_mean + (1.0 - kBnMomentum) * mean;
    bn.running_var = kBnMomentum * bn.running_var + (1.0 - kBnMomentum) * var;
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }
  const Vector inv_std = (var.array() + kBnEps).rsqrt();
  Matrix x_hat = (a.rowwise() - mean.transpose()).array().rowwise() *
                 inv_std.transpose().array();
  Matrix out = (x_hat.array().rowwise() * bn.scale.transpose().array()).rowwise() +
               bn.shift.transpose().array();
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = inv_std;
    cache->x_hat = std::move(x_hat);
  }
  (void)rows;
  return out;
}

// Gradient through training-mode batch normalization.
Matrix batch_norm_backward(const Matrix& grad_out, const BatchNormParams& bn,
                           const BnCache& cache, Vector& grad_scale, Vector& grad_shift) {
  const double n = static_cast<double>(grad_out.rows());
  grad_scale = (grad_out.array() * cache.x_hat.array()).colwise().sum();
  grad_shift = grad_out.colwise().sum();
  const Matrix gx = grad_out.array().rowwise() * bn.scale.transpose().array();
  const Vector sum_gx = gx.colwise().sum();
  const Vector sum_gx_xhat = (gx.array() * cache.x_hat.array()).colwise().sum();
  Matrix grad_a =
      (gx * n).rowwise() - sum_gx.transpose();
  grad_a.array() -= cache.x_hat.array().rowwise() * sum_gx_xhat.transpose().array();
  grad_a.array().rowwise() *= (cache.inv_std / n).transpose().array();
  return grad_a;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix he_uniform(int rows, int cols, int fan_in, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Matrix w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
  return w;
}

BatchNormParams identity_bn(int dim) {
  BatchNormParams bn;
  bn.scale = Vector::Ones(dim);
  bn.shift = Vector::Zero(dim);
  bn.running_mean = Vector::Zero(dim);
  bn.running_var = Vector::Ones(dim);
  return bn;
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim <= 0 || hidden1 <= 0 || hidden2 <= 0 || output_dim <= 0)
    throw DomainError("MlpSpec: all layer widths must be positive");
  if (skip_prefix < 0 || skip_prefix > input_dim)
    throw DomainError("MlpSpec: skip_prefix must lie in [0, input_dim]");
}

MlpParams he_init(const MlpSpec& spec, RngStream& rng) {
  spec.validate();
  MlpParams p;
  p.w1 = he_uniform(spec.hidden1, spec.input_dim, spec.input_dim, rng);
  p.b1 = Vector::Zero(spec.hidden1);
  p.w2 = he_uniform(spec.hidden2, spec.hidden1, spec.hidden1, rng);
  p.b2 = Vector::Zero(spec.hidden2);
  p.w3 = he_uniform(spec.output_dim, spec.output_input_dim(), spec.output_input_dim(), rng);
  p.b3 = Vector::Zero(spec.output_dim);
  if (spec.batch_norm) {
    p.bn1 = identity_bn(spec.hidden1);
    p.bn2 = identity_bn(spec.hidden2);
  }
  return p;
}

MlpParams zeros_like(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  p.w1 = Matrix::Zero(spec.hidden1, spec.input_dim);
  p.b1 = Vector::Zero(spec.hidden1);
  p.w2 = Matrix::Zero(spec.hidden2, spec.hidden1);
  p.b2 = Vector::Zero(spec.hidden2);
  p.w3 = Matrix::Zero(spec.output_dim, spec.output_input_dim());
  p.b3 = Vector::Zero(spec.output_dim);
  if (spec.batch_norm) {
    p.bn1 = identity_bn(spec.hidden1);
    p.bn2 = identity_bn(spec.hidden2);
    p.bn1.scale.setZero();
    p.bn2.scale.setZero();
  }
  return p;
}

Matrix mlp_forward(const MlpSpec& spec, MlpParams& params, const Matrix& input,
                   bool training, MlpCache* cache) {
  spec.validate();
  if (input.cols() != spec.input_dim)
    throw DimensionError("mlp_forward: input has " + std::to_string(input.cols()) +
                         " columns, spec expects " + std::to_string(spec.input_dim));
  if (input.rows() == 0) throw DimensionError("mlp_forward: empty batch");

  Matrix pre1 = affine(input, params.w1, params.b1);
  if (spec.batch_norm)
    pre1 = batch_norm_forward(pre1, params.bn1, training, cache ? &cache->bn1 : nullptr);
  Matrix act1 = relu(pre1);

  Matrix pre2 = affine(act1, params.w2, params.b2);
  if (spec.batch_norm)
    pre2 = batch_norm_forward(pre2, params.bn2, training, cache ? &cache->bn2 : nullptr);
  Matrix act2 = relu(pre2);

  Matrix out_in(input.rows(), spec.output_input_dim());
  if (spec.skip_prefix > 0) out_in.leftCols(spec.skip_prefix) = input.leftCols(spec.skip_prefix);
  out_in.rightCols(spec.hidden2) = act2;
  Matrix out = affine(out_in, params.w3, params.b3);

  if (cache) {
    cache->training = training;
    cache->input = input;
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->pre2 = std::move(pre2);
    cache->act2 = std::move(act2);
  }
  return out;
}

MlpGrads mlp_backward(const MlpSpec& spec, const MlpParams& params, const MlpCache& cache,
                      const Matrix& grad_output, const Matrix* grad_act1) {
  if (spec.batch_norm && !cache.training)
    throw DomainError("mlp_backward: cache must come from a training-mode forward");
  if (grad_output.rows() != cache.input.rows() || grad_output.cols() != spec.output_dim)
    throw DimensionError("mlp_backward: grad_output shape mismatch");

  MlpGrads g;
  g.params = zeros_like(spec);

  // Output layer; the skip prefix splits off into the input gradient.
  Matrix out_in(cache.input.rows(), spec.output_input_dim());
  if (spec.skip_prefix > 0)
    out_in.leftCols(spec.skip_prefix) = cache.input.leftCols(spec.skip_prefix);
  out_in.rightCols(spec.hidden2) = cache.act2;
  g.params.w3 = grad_output.transpose() * out_in;
  g.params.b3 = grad_output.colwise().sum();
  Matrix grad_out_in = grad_output * params.w3;

  g.input = Matrix::Zero(cache.input.rows(), spec.input_dim);
  if (spec.skip_prefix > 0)
    g.input.leftCols(spec.skip_prefix) = grad_out_in.leftCols(spec.skip_prefix);

  Matrix grad_act2 = grad_out_in.rightCols(spec.hidden2);
  Matrix grad_pre2 =
      (cache.pre2.array() > 0.0).cast<double>() * grad_act2.array();
  if (spec.batch_norm)
    grad_pre2 = batch_norm_backward(grad_pre2, params.bn2, cache.bn2, g.params.bn2.scale,
                                    g.params.bn2.shift);
  g.params.w2 = grad_pre2.transpose() * cache.act1;
  g.params.b2 = grad_pre2.colwise().sum();

  Matrix grad_a1 = grad_pre2 * params.w2;
  if (grad_act1) {
    if (grad_act1->rows() != grad_a1.rows() || grad_act1->cols() != grad_a1.cols())
      throw DimensionError("mlp_backward: grad_act1 shape mismatch");
    grad_a1 += *grad_act1;
  }
  Matrix grad_pre1 = (cache.pre1.array() > 0.0).cast<double>() * grad_a1.array();
  if (spec.batch_norm)
    grad_pre1 = batch_norm_backward(grad_pre1, params.bn1, cache.bn1, g.params.bn1.scale,
                                    g.params.bn1.shift);
  g.params.w1 = grad_pre1.transpose() * cache.input;
  g.params.b1 = grad_pre1.colwise().sum();
  g.input += grad_pre1 * params.w1;
  return g;
}

int param_count(const MlpSpec& spec) {
  spec.validate();
  int n = spec.hidden1 * (spec.input_dim + 1) + spec.hidden2 * (spec.hidden1 + 1) +
          spec.output_dim * (spec.output_input_dim() + 1);
  if (spec.batch_norm) n += 2 * (spec.hidden1 + spec.hidden2);
  return n;
}

namespace {

template <typename Fn>
void for_each_block(const MlpSpec& spec, MlpParams& p, Fn&& fn) {
  fn(p.w1);
  fn(p.b1);
  fn(p.w2);
  fn(p.b2);
  fn(p.w3);
  fn(p.b3);
  if (spec.batch_norm) {
    fn(p.bn1.scale);
    fn(p.bn1.shift);
    fn(p.bn2.scale);
    fn(p.bn2.shift);
  }
}

}  // namespace

Vector flatten(const MlpSpec& spec, const MlpParams& params) {
  Vector flat(param_count(spec));
  Eigen::Index at = 0;
  for_each_block(spec, const_cast<MlpParams&>(params), [&](auto& block) {
    const auto n = block.size();
    flat.segment(at, n) = Eigen::Map<const Vector>(block.data(), n);
    at += n;
  });
  return flat;
}

void unflatten(const MlpSpec& spec, const Vector& flat, MlpParams& params) {
  if (flat.size() != param_count(spec))
    throw DimensionError("unflatten: flat vector has wrong length");
  Eigen::Index at = 0;
  for_each_block(spec, params, [&](auto& block) {
    const auto n = block.size();
    Eigen::Map<Vector>(block.data(), n) = flat.segment(at, n);
    at += n;
  });
}

Vector flatten_grads(const MlpSpec& spec, const MlpParams& grads) {
  return flatten(spec, grads);
}

}  // namespace icm::num
