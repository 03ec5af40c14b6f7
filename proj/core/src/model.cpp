#include "icm/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "icm/errors.hpp"
#include "icm/specfun.hpp"

namespace icm::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::string to_lower(const std::string& s) {
  std::string out(s.size(), '\0');
  std::transform(s.begin(), s.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double log_sigmoid(double t) {
  return t < 0.0 ? t - std::log1p(std::exp(t)) : -std::log1p(std::exp(-t));
}

double sigmoid(double t) {
  return t < 0.0 ? std::exp(t) / (1.0 + std::exp(t)) : 1.0 / (1.0 + std::exp(-t));
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Thresholds for the ordered-categorical trait: levels - 1 points equally
// spaced on [-3, 3] (a single threshold sits at 0).
Vector categorical_thresholds(int levels) {
  if (levels < 2) throw DomainError("categorical thresholds: need at least 2 levels");
  Vector t(levels - 1);
  if (levels == 2) {
    t(0) = 0.0;
    return t;
  }
  for (int i = 0; i < levels - 1; ++i)
    t(i) = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(levels - 2);
  return t;
}

// Builds the (z-batch x w-batch) grid of concatenated [z_i, w_j] rows.
Matrix pair_grid(const Matrix& z, const Matrix& w) {
  const Eigen::Index k = z.cols();
  Matrix grid(z.rows() * w.rows(), 2 * k);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Eigen::Index base = i * w.rows();
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      grid.row(base + j).head(k) = z.row(i);
      grid.row(base + j).tail(k) = w.row(j);
    }
  }
  return grid;
}

}  // namespace

std::string snp_model_name(SnpModelKind kind) {
  return kind == SnpModelKind::kLogisticFa ? "logistic_fa" : "neural";
}

SnpModelKind snp_model_from_name(const std::string& name) {
  const std::string n = to_lower(name);
  if (n == "logistic_fa") return SnpModelKind::kLogisticFa;
  if (n == "neural") return SnpModelKind::kNeural;
  throw DomainError("snp_model_from_name: unknown snp model '" + name + "'");
}

std::string trait_model_name(TraitModelKind kind) {
  return kind == TraitModelKind::kLinear ? "linear" : "neural";
}

TraitModelKind trait_model_from_name(const std::string& name) {
  const std::string n = to_lower(name);
  if (n == "linear") return TraitModelKind::kLinear;
  if (n == "neural") return TraitModelKind::kNeural;
  throw DomainError("trait_model_from_name: unknown trait model '" + name + "'");
}

std::string trait_kind_name(TraitKind kind) {
  switch (kind) {
    case TraitKind::kRealImplicit: return "real_implicit";
    case TraitKind::kRealLocationShift: return "real_location_shift";
    case TraitKind::kCategorical: return "categorical";
  }
  throw DomainError("trait_kind_name: unknown trait kind");
}

TraitKind trait_kind_from_name(const std::string& name) {
  const std::string n = to_lower(name);
  if (n == "real_implicit") return TraitKind::kRealImplicit;
  if (n == "real_location_shift") return TraitKind::kRealLocationShift;
  if (n == "categorical") return TraitKind::kCategorical;
  throw DomainError("trait_kind_from_name: unknown trait kind '" + name + "'");
}

void IcmConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("IcmConfig: latent_dim must be >= 1");
  if (snp_hidden1 < 1 || snp_hidden2 < 1 || trait_hidden1 < 1 || trait_hidden2 < 1)
    throw ConfigError("IcmConfig: hidden sizes must be >= 1");
  if (!(group_lasso_scale > 0.0))
    throw ConfigError("IcmConfig: group_lasso_scale must be positive");
  if (trait_kind == TraitKind::kCategorical && categorical_levels < 2)
    throw ConfigError("IcmConfig: categorical trait needs at least 2 levels");
  if (trait_kind == TraitKind::kRealImplicit && trait_model != TraitModelKind::kNeural)
    throw ConfigError("IcmConfig: the implicit trait kind requires the neural trait model");
}

num::MlpSpec IcmConfig::snp_net_spec() const {
  num::MlpSpec spec;
  spec.input_dim = 2 * latent_dim;
  spec.hidden1 = snp_hidden1;
  spec.hidden2 = snp_hidden2;
  spec.output_dim = 1;
  spec.batch_norm = true;
  spec.skip_prefix = 0;
  return spec;
}

num::MlpSpec IcmConfig::trait_net_spec(int snps) const {
  num::MlpSpec spec;
  spec.input_dim = latent_dim + snps + 1;
  spec.hidden1 = trait_hidden1;
  spec.hidden2 = trait_hidden2;
  spec.output_dim = 1;
  spec.batch_norm = true;
  spec.skip_prefix = latent_dim;
  return spec;
}

double iso_normal_log_density(const Vector& v) {
  return -0.5 * (v.squaredNorm() + static_cast<double>(v.size()) * kLog2Pi);
}

double log_prior_z(const Vector& z) { return iso_normal_log_density(z); }
double log_prior_w(const Vector& w) { return iso_normal_log_density(w); }

double log_prior_phi(const IcmConfig& config, const SnpModelParams& params) {
  if (params.kind != SnpModelKind::kNeural) return 0.0;
  return iso_normal_log_density(num::flatten(config.snp_net_spec(), params.net));
}

Matrix snp_logits(const Matrix& z, const Matrix& w, const IcmConfig& config,
                  SnpModelParams& params) {
  if (z.cols() != config.latent_dim || w.cols() != config.latent_dim)
    throw DimensionError("snp_logits: latent width mismatch");
  if (params.kind == SnpModelKind::kLogisticFa) return z * w.transpose();
  const Matrix out =
      num::mlp_forward(config.snp_net_spec(), params.net, pair_grid(z, w), false);
  return Eigen::Map<const Matrix>(out.data(), w.rows(), z.rows()).transpose();
}

Matrix snp_logits_training(const Matrix& z, const Matrix& w, const IcmConfig& config,
                           SnpModelParams& params, SnpLogitsCache& cache) {
  if (z.cols() != config.latent_dim || w.cols() != config.latent_dim)
    throw DimensionError("snp_logits_training: latent width mismatch");
  cache.rows = z.rows();
  cache.cols = w.rows();
  if (params.kind == SnpModelKind::kLogisticFa) return z * w.transpose();
  const Matrix out = num::mlp_forward(config.snp_net_spec(), params.net,
                                      pair_grid(z, w), true, &cache.net);
  return Eigen::Map<const Matrix>(out.data(), w.rows(), z.rows()).transpose();
}

void snp_logits_backward(const Matrix& grad_logits, const Matrix& z, const Matrix& w,
                         const IcmConfig& config, const SnpModelParams& params,
                         const SnpLogitsCache& cache, Matrix& grad_z, Matrix& grad_w,
                         num::MlpParams* grad_params) {
  if (grad_logits.rows() != z.rows() || grad_logits.cols() != w.rows())
    throw DimensionError("snp_logits_backward: gradient shape mismatch");
  const Eigen::Index k = config.latent_dim;
  if (params.kind == SnpModelKind::kLogisticFa) {
    grad_z = grad_logits * w;
    grad_w = grad_logits.transpose() * z;
    return;
  }
  if (cache.rows != z.rows() || cache.cols != w.rows())
    throw DimensionError("snp_logits_backward: cache shape mismatch");
  Matrix flat(z.rows() * w.rows(), 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < w.rows(); ++j)
      flat(i * w.rows() + j, 0) = grad_logits(i, j);
  const num::MlpGrads g =
      num::mlp_backward(config.snp_net_spec(), params.net, cache.net, flat);
  grad_z = Matrix::Zero(z.rows(), k);
  grad_w = Matrix::Zero(w.rows(), k);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Eigen::Index base = i * w.rows();
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      grad_z.row(i) += g.input.row(base + j).head(k);
      grad_w.row(j) += g.input.row(base + j).tail(k);
    }
  }
  if (grad_params) *grad_params = g.params;
}

double snp_log_prob(int x, double logit) {
  if (x < 0 || x > 2) throw DomainError("snp_log_prob: genotype must be 0, 1, or 2");
  const double log_p = log_sigmoid(logit);
  const double log_q = log_sigmoid(-logit);
  const double log_comb = x == 1 ? std::numbers::ln2 : 0.0;
  return log_comb + static_cast<double>(x) * log_p + static_cast<double>(2 - x) * log_q;
}

double snp_log_prob_grad(int x, double logit) {
  if (x < 0 || x > 2) throw DomainError("snp_log_prob_grad: genotype must be 0, 1, or 2");
  return static_cast<double>(x) - 2.0 * sigmoid(logit);
}

double snp_log_prob_sum(const Matrix& x_block, const Matrix& logits, Matrix* grad) {
  if (x_block.rows() != logits.rows() || x_block.cols() != logits.cols())
    throw DimensionError("snp_log_prob_sum: shape mismatch");
  double total = 0.0;
  if (grad) grad->resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double xv = x_block(i, j);
      const int x = static_cast<int>(xv);
      if (xv != static_cast<double>(x))
        throw DomainError("snp_log_prob_sum: genotype entries must be integers");
      total += snp_log_prob(x, logits(i, j));
      if (grad) (*grad)(i, j) = snp_log_prob_grad(x, logits(i, j));
    }
  }
  return total;
}

int categorical_discretize(double value, int levels) {
  const Vector t = categorical_thresholds(levels);
  int level = 0;
  while (level < levels - 1 && value > t(level)) ++level;
  return level;
}

double categorical_log_pmf(int level, double location, int levels) {
  if (level < 0 || level >= levels)
    throw DomainError("categorical_log_pmf: level out of range");
  const Vector t = categorical_thresholds(levels);
  const double upper = level == levels - 1 ? 1.0 : num::normal_cdf(t(level) - location);
  const double lower = level == 0 ? 0.0 : num::normal_cdf(t(level - 1) - location);
  return std::log(std::max(upper - lower, 1e-300));
}

double categorical_log_pmf_grad(int level, double location, int levels) {
  if (level < 0 || level >= levels)
    throw DomainError("categorical_log_pmf_grad: level out of range");
  const Vector t = categorical_thresholds(levels);
  const double upper = level == levels - 1 ? 1.0 : num::normal_cdf(t(level) - location);
  const double lower = level == 0 ? 0.0 : num::normal_cdf(t(level - 1) - location);
  const double pmf = std::max(upper - lower, 1e-300);
  const double upper_pdf = level == levels - 1 ? 0.0 : normal_pdf(t(level) - location);
  const double lower_pdf = level == 0 ? 0.0 : normal_pdf(t(level - 1) - location);
  return (lower_pdf - upper_pdf) / pmf;
}

TraitValue trait_forward(const Vector& x_row, const Vector& z, double noise,
                         const IcmConfig& config, TraitModelParams& params) {
  config.validate();
  if (x_row.size() != params.snps || z.size() != params.latent_dim)
    throw DimensionError("trait_forward: input shape mismatch");

  TraitValue out;
  double location = 0.0;
  if (params.kind == TraitModelKind::kLinear) {
    location = x_row.dot(params.coef.head(params.snps)) +
               z.dot(params.coef.tail(params.latent_dim));
  } else {
    const num::MlpSpec spec = config.trait_net_spec(params.snps);
    Matrix input(1, spec.input_dim);
    input.row(0).head(params.latent_dim) = z.transpose();
    input.row(0).segment(params.latent_dim, params.snps) = x_row.transpose();
    input(0, spec.input_dim - 1) =
        config.trait_kind == TraitKind::kRealImplicit ? noise : 0.0;
    num::MlpCache cache;
    const Matrix y = num::mlp_forward(spec, params.net, input, false, &cache);
    location = y(0, 0);
    out.hidden1 = cache.act1.row(0).transpose();
  }

  switch (config.trait_kind) {
    case TraitKind::kRealImplicit:
      out.y = location;  // noise already flowed through the network input
      break;
    case TraitKind::kRealLocationShift:
      out.y = location + noise;
      break;
    case TraitKind::kCategorical:
      out.y = static_cast<double>(
          categorical_discretize(location + noise, config.categorical_levels));
      break;
  }
  return out;
}

TraitBatch trait_forward_batch(const Matrix& x, const Matrix& z, const Vector& noise,
                               const IcmConfig& config, TraitModelParams& params,
                               bool training) {
  if (x.rows() != z.rows() || x.cols() != params.snps || z.cols() != params.latent_dim)
    throw DimensionError("trait_forward_batch: input shape mismatch");
  if (noise.size() != 0 && noise.size() != x.rows())
    throw DimensionError("trait_forward_batch: noise length mismatch");

  TraitBatch out;
  if (params.kind == TraitModelKind::kLinear) {
    out.location = x * params.coef.head(params.snps) + z * params.coef.tail(params.latent_dim);
    return out;
  }
  const num::MlpSpec spec = config.trait_net_spec(params.snps);
  Matrix input(x.rows(), spec.input_dim);
  input.leftCols(params.latent_dim) = z;
  input.middleCols(params.latent_dim, params.snps) = x;
  if (config.trait_kind == TraitKind::kRealImplicit && noise.size() > 0)
    input.col(spec.input_dim - 1) = noise;
  else
    input.col(spec.input_dim - 1).setZero();
  const Matrix y = num::mlp_forward(spec, params.net, input, training, &out.cache);
  out.location = y.col(0);
  out.hidden1 = out.cache.act1;
  return out;
}

double group_lasso_log_prior(const IcmConfig& config, const TraitModelParams& params,
                             double scale, TraitModelParams* grad) {
  if (!(scale > 0.0)) throw DomainError("group_lasso_log_prior: scale must be positive");

  double value = 0.0;
  if (params.kind == TraitModelKind::kLinear) {
    if (grad) {
      grad->kind = params.kind;
      grad->snps = params.snps;
      grad->latent_dim = params.latent_dim;
      grad->coef = Vector::Zero(params.coef.size());
    }
    // Size-1 groups: the lasso term is -scale * |coefficient| per SNP.
    for (int m = 0; m < params.snps; ++m) {
      const double c = params.coef(m);
      value -= scale * std::abs(c);
      if (grad && c != 0.0) grad->coef(m) = -scale * (c > 0.0 ? 1.0 : -1.0);
    }
    for (int k = 0; k < params.latent_dim; ++k) {
      const double c = params.coef(params.snps + k);
      value += -0.5 * (c * c + kLog2Pi);
      if (grad) grad->coef(params.snps + k) = -c;
    }
    return value;
  }

  const num::MlpSpec spec = config.trait_net_spec(params.snps);
  if (grad) {
    grad->kind = params.kind;
    grad->snps = params.snps;
    grad->latent_dim = params.latent_dim;
    grad->net = num::zeros_like(spec);
  }
  const double sqrt_group = std::sqrt(static_cast<double>(spec.hidden1));
  const int first_snp_col = params.latent_dim;
  for (int m = 0; m < params.snps; ++m) {
    const auto col = params.net.w1.col(first_snp_col + m);
    const double norm = col.norm();
    value -= scale * sqrt_group * norm;
    if (grad && norm > 0.0)
      grad->net.w1.col(first_snp_col + m) = -scale * sqrt_group / norm * col;
  }

  // Standard-normal prior on everything outside the SNP groups: the z and
  // noise columns of the first layer, and all later weights and biases.
  double sq = 0.0;
  Eigen::Index count = 0;
  const auto k = static_cast<Eigen::Index>(params.latent_dim);
  auto accumulate = [&](const auto& block) {
    sq += block.array().square().sum();
    count += block.size();
  };
  accumulate(params.net.w1.leftCols(k));
  accumulate(params.net.w1.rightCols(1));
  accumulate(params.net.b1);
  accumulate(params.net.w2);
  accumulate(params.net.b2);
  accumulate(params.net.w3);
  accumulate(params.net.b3);
  accumulate(params.net.bn1.scale);
  accumulate(params.net.bn1.shift);
  accumulate(params.net.bn2.scale);
  accumulate(params.net.bn2.shift);
  value += -0.5 * (sq + static_cast<double>(count) * kLog2Pi);
  if (grad) {
    grad->net.w1.leftCols(k) = -params.net.w1.leftCols(k);
    grad->net.w1.rightCols(1) = -params.net.w1.rightCols(1);
    grad->net.b1 = -params.net.b1;
    grad->net.w2 = -params.net.w2;
    grad->net.b2 = -params.net.b2;
    grad->net.w3 = -params.net.w3;
    grad->net.b3 = -params.net.b3;
    grad->net.bn1.scale = -params.net.bn1.scale;
    grad->net.bn1.shift = -params.net.bn1.shift;
    grad->net.bn2.scale = -params.net.bn2.scale;
    grad->net.bn2.shift = -params.net.bn2.shift;
  }
  return value;
}

TraitModelParams init_trait_params(const IcmConfig& config, int snps,
                                   num::RngStream& rng) {
  config.validate();
  TraitModelParams p;
  p.kind = config.trait_model;
  p.snps = snps;
  p.latent_dim = config.latent_dim;
  if (p.kind == TraitModelKind::kLinear) {
    p.coef = Vector::Zero(snps + config.latent_dim);
  } else {
    p.net = num::he_init(config.trait_net_spec(snps), rng);
  }
  return p;
}

SnpModelParams init_snp_params(const IcmConfig& config, num::RngStream& rng) {
  config.validate();
  SnpModelParams p;
  p.kind = config.snp_model;
  if (p.kind == SnpModelKind::kNeural) p.net = num::he_init(config.snp_net_spec(), rng);
  return p;
}

}  // namespace icm::model
