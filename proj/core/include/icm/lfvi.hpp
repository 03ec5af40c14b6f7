#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icm/adam.hpp"
#include "icm/genotype.hpp"
#include "icm/model.hpp"
#include "icm/rng.hpp"

namespace icm::lfvi {

// Stage 1 subsamples SNPs; one epoch scans every SNP once in shuffled
// minibatches.  individual_batch 0 means all individuals per z-update.
struct Stage1Config {
  int snp_batch = 512;
  int individual_batch = 0;
  int epochs = 2;
  double step_size = 0.005;
  double step_size_z = -1.0;  // negative inherits step_size
  int mc_samples = 1;
  std::uint64_t seed = 0;

  double z_step() const { return step_size_z < 0.0 ? step_size : step_size_z; }
  void validate() const;
};

// Stage 2 never subsamples SNPs; individuals may be minibatched.
struct Stage2Config {
  int epochs = 200;
  int individual_batch = 0;
  double step_size = 0.005;
  int mc_samples = 1;
  int ratio_steps = 1;
  int generator_steps = 1;
  int ratio_hidden1 = 64;
  int ratio_hidden2 = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

// Gaussian variational posteriors plus point estimates and per-block
// optimizer state.  log_sigma entries are clamped to [-8, 4].
struct VariationalState {
  model::IcmConfig config;
  int individuals = 0;
  int snps = 0;
  Matrix mu_z, log_sigma_z;  // individuals x K
  Matrix mu_w, log_sigma_w;  // snps x K
  model::SnpModelParams phi;
  model::TraitModelParams theta;
  bool theta_fitted = false;
  num::MlpParams ratio;
  bool ratio_allocated = false;
  int ratio_hidden1 = 0;
  int ratio_hidden2 = 0;
  num::AdamState opt_mu_z, opt_ls_z, opt_mu_w, opt_ls_w, opt_phi, opt_theta, opt_ratio;
  int stage1_epochs_done = 0;
  int stage2_epochs_done = 0;
  std::uint64_t stage1_seed = 0;
};

inline constexpr double kLogSigmaFloor = -8.0;
inline constexpr double kLogSigmaCeil = 4.0;

// One metrics observation: stage number, epoch index, named block, value.
struct MetricRow {
  int stage = 0;
  int epoch = 0;
  std::string block;
  double value = 0.0;
};

// sample = mu + exp(log_sigma) (.) noise, noise standard normal, drawn
// row-major; the noise is returned for frozen-noise gradient computation.
std::pair<Vector, Vector> reparam_sample(const Vector& mu, const Vector& log_sigma,
                                         num::RngStream& rng);
std::pair<Matrix, Matrix> reparam_sample(const Matrix& mu, const Matrix& log_sigma,
                                         num::RngStream& rng);

// Single-sample estimate of log prior(sample) - log q(sample) for one
// diagonal-Gaussian factor.
double gaussian_entropy_terms(const Vector& mu, const Vector& log_sigma,
                              const Vector& sample);

// Same value plus gradients with respect to (mu, log_sigma) through the
// reparameterization at frozen noise.
struct EntropyTermsGrad {
  double value = 0.0;
  Vector grad_mu;
  Vector grad_log_sigma;
};
EntropyTermsGrad gaussian_entropy_terms_grad(const Vector& mu, const Vector& log_sigma,
                                             const Vector& sample);

// Frozen-noise Monte Carlo objective of stage 1 over the full data (the
// quantity whose subsampled gradients stage1_step estimates): scaled
// genotype log-likelihood at the reparameterized samples, plus
// prior-minus-entropy terms for every z row and w row, plus log p(phi).
double stage1_objective(const GenotypeMatrix& x, const model::IcmConfig& config,
                        const Matrix& mu_z, const Matrix& log_sigma_z,
                        const Matrix& mu_w, const Matrix& log_sigma_w,
                        model::SnpModelParams& phi, const Matrix& noise_z,
                        const Matrix& noise_w);

// Analytic gradients of stage1_objective at frozen noise, for the same
// full-batch setting (used by the gradient suite; stage1_step applies the
// subsampled, scaled version of these).
struct Stage1FullGrads {
  double value = 0.0;
  Matrix grad_mu_z, grad_log_sigma_z;
  Matrix grad_mu_w, grad_log_sigma_w;
  num::MlpParams grad_phi;  // neural SNP model only
};
Stage1FullGrads stage1_objective_grads(const GenotypeMatrix& x,
                                       const model::IcmConfig& config,
                                       const Matrix& mu_z, const Matrix& log_sigma_z,
                                       const Matrix& mu_w, const Matrix& log_sigma_w,
                                       model::SnpModelParams& phi, const Matrix& noise_z,
                                       const Matrix& noise_w);

// Per-step metric estimates (the epoch trace averages these).
struct StepStats {
  double elbo = 0.0;
  double xlik = 0.0;
  double w_terms = 0.0;
  double z_terms = 0.0;
};

// One two-pass cycle on a SNP minibatch: update (mu_w, log_sigma_w) rows
// and phi from a first reparameterized sample, then (mu_z, log_sigma_z)
// from a second.  The genotype likelihood term is scaled by
// snps / batch_size; each w row's prior-minus-entropy term shares that
// scale so the whole per-row gradient stays unbiased, while z rows keep
// their own terms unscaled.
StepStats stage1_step(const GenotypeMatrix& x, const std::vector<int>& snp_batch,
                      VariationalState& state, const Stage1Config& config,
                      num::RngStream& step_rng);

VariationalState stage1_init(const model::IcmConfig& config, int individuals, int snps,
                             std::uint64_t seed);

// Runs epochs [state.stage1_epochs_done, target_epochs); resuming from a
// checkpoint replays the identical epoch streams, so an interrupted run
// continues bit-exactly.
void stage1_run_epochs(VariationalState& state, const GenotypeMatrix& x,
                       const Stage1Config& config, int target_epochs,
                       std::vector<MetricRow>* metrics,
                       std::vector<double>* step_elbos = nullptr);

// stage1_init + all epochs.  Never reads a trait vector.
VariationalState stage1_fit(const GenotypeMatrix& x, const model::IcmConfig& config,
                            const Stage1Config& stage1,
                            std::vector<MetricRow>* metrics = nullptr,
                            std::vector<double>* step_elbos = nullptr);

// Monte Carlo EM for the tractable trait kinds (location shift or
// categorical): Adam ascent on E_{q(z)} log p(y | x, z, theta) + log
// p(theta), z resampled each epoch, SNPs never subsampled.
void stage2_fit_tractable(const GenotypeMatrix& x, const Vector& y,
                          VariationalState& state, const Stage2Config& config,
                          std::vector<MetricRow>* metrics = nullptr);

// Binary-discrimination loss for the ratio estimator on stacked rows
// [y, h1]: mean softplus(-r) over model samples + mean softplus(r) over
// data samples (so r is pushed up on model samples, down on data).
struct RatioLossResult {
  double loss = 0.0;
  num::MlpParams grad;      // wrt ratio parameters (for descent, negate)
  Vector grad_y_fake;       // d loss / d y_fake, for completeness
};
RatioLossResult ratio_loss(const num::MlpSpec& ratio_spec, num::MlpParams& ratio,
                           const Vector& y_real, const Vector& y_fake,
                           const Matrix& h1);

// Ratio evaluation for analysis/tests: r on rows [y, h1].
Vector ratio_forward(const num::MlpSpec& ratio_spec, num::MlpParams& ratio,
                     const Vector& y, const Matrix& h1);

num::MlpSpec ratio_net_spec(int trait_hidden1, int ratio_hidden1, int ratio_hidden2);

// Alternating ratio/generator optimization for the implicit trait kind.
// Each epoch runs config.ratio_steps discriminator updates, then
// config.generator_steps updates that ascend the contrastive proxy
// sum_n [r(y_n, h1_n) - r(y_fake_n, h1_n)] + log p(theta) (group-Lasso
// prior included), pushing model samples toward indistinguishability
// from the data; gradients reach theta through y_fake and through h1.
void stage2_fit_lfvi(const GenotypeMatrix& x, const Vector& y, VariationalState& state,
                     const Stage2Config& config,
                     std::vector<MetricRow>* metrics = nullptr);

}  // namespace icm::lfvi
