#pragma once

#include <string>

#include "icm/la.hpp"
#include "icm/mlp.hpp"

namespace icm::model {

enum class SnpModelKind { kLogisticFa, kNeural };
enum class TraitModelKind { kLinear, kNeural };
enum class TraitKind { kRealImplicit, kRealLocationShift, kCategorical };

std::string snp_model_name(SnpModelKind kind);
SnpModelKind snp_model_from_name(const std::string& name);
std::string trait_model_name(TraitModelKind kind);
TraitModelKind trait_model_from_name(const std::string& name);
std::string trait_kind_name(TraitKind kind);
TraitKind trait_kind_from_name(const std::string& name);

// Model shape shared by inference and the CLI.  latent_dim is the
// confounder dimension; hidden sizes apply to the neural variants only.
struct IcmConfig {
  int latent_dim = 3;
  int snp_hidden1 = 16;
  int snp_hidden2 = 16;
  int trait_hidden1 = 32;
  int trait_hidden2 = 256;
  SnpModelKind snp_model = SnpModelKind::kLogisticFa;
  TraitModelKind trait_model = TraitModelKind::kLinear;
  TraitKind trait_kind = TraitKind::kRealLocationShift;
  int categorical_levels = 5;
  double group_lasso_scale = 1.0;

  void validate() const;
  // SNP network: [z, w] (2K wide) to one logit.
  num::MlpSpec snp_net_spec() const;
  // Trait network: [z, x, noise] (K + M + 1 wide) to one output, with the
  // z prefix skipped into the output layer.
  num::MlpSpec trait_net_spec(int snps) const;
};

struct SnpModelParams {
  SnpModelKind kind = SnpModelKind::kLogisticFa;
  num::MlpParams net;  // kNeural only
};

struct TraitModelParams {
  TraitModelKind kind = TraitModelKind::kLinear;
  int snps = 0;
  int latent_dim = 0;
  Vector coef;         // kLinear: length snps + latent_dim, ordered [x, z]
  num::MlpParams net;  // kNeural
};

// Standard-normal log density plus gradient (the gradient is simply -v).
double iso_normal_log_density(const Vector& v);
double log_prior_z(const Vector& z);
double log_prior_w(const Vector& w);
double log_prior_phi(const IcmConfig& config, const SnpModelParams& params);

// Logit for every (individual in z rows) x (SNP in w rows) pair.  The
// neural variant evaluates the shared network on each concatenated pair;
// memory stays proportional to the batch.
Matrix snp_logits(const Matrix& z, const Matrix& w, const IcmConfig& config,
                  SnpModelParams& params);

// Training-mode forward that keeps what the backward pass needs.
struct SnpLogitsCache {
  num::MlpCache net;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};
Matrix snp_logits_training(const Matrix& z, const Matrix& w, const IcmConfig& config,
                           SnpModelParams& params, SnpLogitsCache& cache);

// Backpropagates per-pair logit gradients to z rows, w rows, and (neural
// variant) network parameters; `grad_params` may be null to skip them.
void snp_logits_backward(const Matrix& grad_logits, const Matrix& z, const Matrix& w,
                         const IcmConfig& config, const SnpModelParams& params,
                         const SnpLogitsCache& cache, Matrix& grad_z, Matrix& grad_w,
                         num::MlpParams* grad_params);

// log pmf of Binomial(2, sigmoid(logit)) at x in {0,1,2}, stable for any
// finite logit; gradient with respect to the logit is x - 2*sigmoid(logit).
double snp_log_prob(int x, double logit);
double snp_log_prob_grad(int x, double logit);

// Batch form over a genotype block (counts as doubles); returns the summed
// log pmf, writing per-entry logit gradients when `grad` is non-null.
double snp_log_prob_sum(const Matrix& x_block, const Matrix& logits, Matrix* grad);

// Ordered-categorical pmf: a scalar location is discretized over
// categorical_levels - 1 thresholds equally spaced on [-3, 3].
double categorical_log_pmf(int level, double location, int levels);
double categorical_log_pmf_grad(int level, double location, int levels);
int categorical_discretize(double value, int levels);

// Single-row generative pass: trait value plus the first hidden layer
// (empty for the linear model).  For location-shift and categorical kinds
// the noise enters additively after the network.
struct TraitValue {
  double y = 0.0;
  Vector hidden1;
};
TraitValue trait_forward(const Vector& x_row, const Vector& z, double noise,
                         const IcmConfig& config, TraitModelParams& params);

// Batched location computation for stage-2 fitting: location per row, with
// a cache for backpropagation in the neural variant.  For kRealImplicit
// the noise vector feeds the network input; otherwise the noise column is
// zero and the location is the network (or linear) output itself.
struct TraitBatch {
  Vector location;
  Matrix hidden1;
  num::MlpCache cache;
};
TraitBatch trait_forward_batch(const Matrix& x, const Matrix& z, const Vector& noise,
                               const IcmConfig& config, TraitModelParams& params,
                               bool training);

// log p(theta): group-Lasso on the per-SNP first-layer weight groups of
// the neural trait model, -scale * sqrt(group_size) * ||group||_2 per SNP,
// plus a standard-normal log prior on every other trainable parameter.
// For the linear model the SNP coefficients themselves form the groups
// (size 1).  Writes the gradient into `grad` when non-null (allocated to
// match `params`).
double group_lasso_log_prior(const IcmConfig& config, const TraitModelParams& params,
                             double scale, TraitModelParams* grad);

TraitModelParams init_trait_params(const IcmConfig& config, int snps,
                                   num::RngStream& rng);
SnpModelParams init_snp_params(const IcmConfig& config, num::RngStream& rng);

}  // namespace icm::model
