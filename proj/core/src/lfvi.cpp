#include "icm/lfvi.hpp"

#include <cmath>
#include <numeric>

#include "icm/errors.hpp"

namespace icm::lfvi {

namespace {

// Child-stream keys (stable across versions; checkpoints rely on them).
constexpr std::uint64_t kKeyInit = 0x51a9e1;
constexpr std::uint64_t kKeyStage1 = 0x51a9e2;
constexpr std::uint64_t kKeyStage2 = 0x51a9e3;
constexpr std::uint64_t kKeyRatioInit = 0x51a9e4;

Matrix rows_of(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

Matrix geno_block(const GenotypeMatrix& x, const std::vector<int>& ind,
                  const std::vector<int>& snps_idx) {
  Matrix out(static_cast<Eigen::Index>(ind.size()),
             static_cast<Eigen::Index>(snps_idx.size()));
  for (std::size_t j = 0; j < snps_idx.size(); ++j)
    for (std::size_t i = 0; i < ind.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(x(ind[i], snps_idx[j]));
  return out;
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Matrix draw_noise(Eigen::Index rows, Eigen::Index cols, num::RngStream& rng) {
  Matrix noise(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) noise(i, j) = rng.normal();
  return noise;
}

void clamp_log_sigma_rows(Matrix& ls, const std::vector<int>& rows) {
  for (const int r : rows)
    for (Eigen::Index j = 0; j < ls.cols(); ++j)
      ls(r, j) = std::clamp(ls(r, j), kLogSigmaFloor, kLogSigmaCeil);
}

struct EvalRequest {
  bool want_z = false;
  bool want_w = false;
  bool want_phi = false;
};

struct EvalResult {
  double xlik = 0.0;     // scaled genotype log-likelihood
  double z_terms = 0.0;  // prior-minus-entropy over the individual rows
  double w_terms = 0.0;  // scaled prior-minus-entropy over the SNP rows + phi prior
  Matrix g_mu_z, g_ls_z;
  Matrix g_mu_w, g_ls_w;
  Vector g_phi_flat;

  double value() const { return xlik + z_terms + w_terms; }
};

// Single-sample evaluation of the stage-1 objective restricted to the
// given individual and SNP rows.  The likelihood term is scaled by
// lik_scale; each w row's local prior-minus-entropy shares that scale
// (keeping the whole per-row estimator unbiased under SNP subsampling)
// while z rows keep scale 1.
EvalResult stage1_eval(const GenotypeMatrix& x, const model::IcmConfig& cfg,
                       const std::vector<int>& ind, const std::vector<int>& snps_idx,
                       const Matrix& mu_z, const Matrix& ls_z, const Matrix& mu_w,
                       const Matrix& ls_w, model::SnpModelParams& phi,
                       const Matrix& noise_z, const Matrix& noise_w, double lik_scale,
                       const EvalRequest& req) {
  const Matrix mu_z_b = rows_of(mu_z, ind);
  const Matrix ls_z_b = rows_of(ls_z, ind);
  const Matrix mu_w_b = rows_of(mu_w, snps_idx);
  const Matrix ls_w_b = rows_of(ls_w, snps_idx);
  const Matrix sigma_z = ls_z_b.array().exp();
  const Matrix sigma_w = ls_w_b.array().exp();
  const Matrix z_s = mu_z_b + sigma_z.cwiseProduct(noise_z);
  const Matrix w_s = mu_w_b + sigma_w.cwiseProduct(noise_w);

  const bool neural = phi.kind == model::SnpModelKind::kNeural;
  const bool need_grads = req.want_z || req.want_w || req.want_phi;

  model::SnpLogitsCache cache;
  const Matrix logits = need_grads || neural
                            ? model::snp_logits_training(z_s, w_s, cfg, phi, cache)
                            : model::snp_logits(z_s, w_s, cfg, phi);

  const Matrix x_block = geno_block(x, ind, snps_idx);
  Matrix lik_grad;
  EvalResult res;
  res.xlik =
      lik_scale * model::snp_log_prob_sum(x_block, logits, need_grads ? &lik_grad : nullptr);

  // Prior-minus-entropy per row: -||s||^2/2 + ||noise||^2/2 + sum(log_sigma).
  res.z_terms = -0.5 * z_s.squaredNorm() + 0.5 * noise_z.squaredNorm() + ls_z_b.sum();
  res.w_terms = lik_scale * (-0.5 * w_s.squaredNorm() + 0.5 * noise_w.squaredNorm() +
                             ls_w_b.sum());
  if (neural) res.w_terms += model::log_prior_phi(cfg, phi);

  if (!need_grads) return res;

  Matrix grad_z, grad_w;
  num::MlpParams grad_phi;
  model::snp_logits_backward(lik_grad, z_s, w_s, cfg, phi, cache, grad_z, grad_w,
                             req.want_phi && neural ? &grad_phi : nullptr);

  if (req.want_z) {
    // d/d sample = scaled likelihood gradient minus the prior pull.
    const Matrix ds = lik_scale * grad_z - z_s;
    res.g_mu_z = ds;
    res.g_ls_z = ds.cwiseProduct(z_s - mu_z_b);
    res.g_ls_z.array() += 1.0;
  }
  if (req.want_w) {
    const Matrix ds = lik_scale * (grad_w - w_s);
    res.g_mu_w = ds;
    res.g_ls_w = ds.cwiseProduct(w_s - mu_w_b);
    res.g_ls_w.array() += lik_scale;
  }
  if (req.want_phi && neural) {
    const num::MlpSpec spec = cfg.snp_net_spec();
    res.g_phi_flat = lik_scale * num::flatten(spec, grad_phi) -
                     num::flatten(spec, phi.net);
  }
  return res;
}

void check_finite_block(const Matrix& g, const char* block) {
  if (!g.allFinite())
    throw NumericError(std::string("stage1_step: non-finite gradient in block ") + block);
}

}  // namespace

void Stage1Config::validate() const {
  if (snp_batch < 1) throw ConfigError("Stage1Config: snp_batch must be >= 1");
  if (individual_batch < 0)
    throw ConfigError("Stage1Config: individual_batch must be >= 0");
  if (epochs < 0) throw ConfigError("Stage1Config: epochs must be >= 0");
  if (mc_samples < 1) throw ConfigError("Stage1Config: mc_samples must be >= 1");
  if (step_size < 0.0) throw ConfigError("Stage1Config: step_size must be >= 0");
}

void Stage2Config::validate() const {
  if (epochs < 0) throw ConfigError("Stage2Config: epochs must be >= 0");
  if (individual_batch < 0)
    throw ConfigError("Stage2Config: individual_batch must be >= 0");
  if (mc_samples < 1) throw ConfigError("Stage2Config: mc_samples must be >= 1");
  if (step_size < 0.0) throw ConfigError("Stage2Config: step_size must be >= 0");
  if (ratio_steps < 0 || generator_steps < 0)
    throw ConfigError("Stage2Config: alternation counts must be >= 0");
  if (ratio_hidden1 < 1 || ratio_hidden2 < 1)
    throw ConfigError("Stage2Config: ratio hidden sizes must be >= 1");
}

std::pair<Vector, Vector> reparam_sample(const Vector& mu, const Vector& log_sigma,
                                         num::RngStream& rng) {
  if (mu.size() != log_sigma.size())
    throw DimensionError("reparam_sample: parameter length mismatch");
  Vector noise(mu.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = rng.normal();
  Vector sample = mu + log_sigma.array().exp().matrix().cwiseProduct(noise);
  return {std::move(sample), std::move(noise)};
}

std::pair<Matrix, Matrix> reparam_sample(const Matrix& mu, const Matrix& log_sigma,
                                         num::RngStream& rng) {
  if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols())
    throw DimensionError("reparam_sample: parameter shape mismatch");
  Matrix noise = draw_noise(mu.rows(), mu.cols(), rng);
  Matrix sample = mu + log_sigma.array().exp().matrix().cwiseProduct(noise);
  return {std::move(sample), std::move(noise)};
}

double gaussian_entropy_terms(const Vector& mu, const Vector& log_sigma,
                              const Vector& sample) {
  if (mu.size() != log_sigma.size() || mu.size() != sample.size())
    throw DimensionError("gaussian_entropy_terms: length mismatch");
  const Vector noise =
      (sample - mu).cwiseQuotient(log_sigma.array().exp().matrix());
  return -0.5 * sample.squaredNorm() + 0.5 * noise.squaredNorm() + log_sigma.sum();
}

EntropyTermsGrad gaussian_entropy_terms_grad(const Vector& mu, const Vector& log_sigma,
                                             const Vector& sample) {
  EntropyTermsGrad out;
  out.value = gaussian_entropy_terms(mu, log_sigma, sample);
  out.grad_mu = -sample;
  out.grad_log_sigma = (-sample).cwiseProduct(sample - mu);
  out.grad_log_sigma.array() += 1.0;
  return out;
}

double stage1_objective(const GenotypeMatrix& x, const model::IcmConfig& config,
                        const Matrix& mu_z, const Matrix& log_sigma_z,
                        const Matrix& mu_w, const Matrix& log_sigma_w,
                        model::SnpModelParams& phi, const Matrix& noise_z,
                        const Matrix& noise_w) {
  const EvalResult res = stage1_eval(
      x, config, all_indices(x.individuals()), all_indices(x.snps()), mu_z,
      log_sigma_z, mu_w, log_sigma_w, phi, noise_z, noise_w, 1.0, EvalRequest{});
  return res.value();
}

Stage1FullGrads stage1_objective_grads(const GenotypeMatrix& x,
                                       const model::IcmConfig& config,
                                       const Matrix& mu_z, const Matrix& log_sigma_z,
                                       const Matrix& mu_w, const Matrix& log_sigma_w,
                                       model::SnpModelParams& phi, const Matrix& noise_z,
                                       const Matrix& noise_w) {
  EvalRequest req;
  req.want_z = req.want_w = req.want_phi = true;
  const EvalResult res = stage1_eval(
      x, config, all_indices(x.individuals()), all_indices(x.snps()), mu_z,
      log_sigma_z, mu_w, log_sigma_w, phi, noise_z, noise_w, 1.0, req);
  Stage1FullGrads out;
  out.value = res.value();
  out.grad_mu_z = res.g_mu_z;
  out.grad_log_sigma_z = res.g_ls_z;
  out.grad_mu_w = res.g_mu_w;
  out.grad_log_sigma_w = res.g_ls_w;
  if (phi.kind == model::SnpModelKind::kNeural) {
    const num::MlpSpec spec = config.snp_net_spec();
    out.grad_phi = num::zeros_like(spec);
    num::unflatten(spec, res.g_phi_flat, out.grad_phi);
  }
  return out;
}

StepStats stage1_step(const GenotypeMatrix& x, const std::vector<int>& snp_batch,
                      VariationalState& state, const Stage1Config& config,
                      num::RngStream& step_rng) {
  config.validate();
  if (snp_batch.empty()) throw DimensionError("stage1_step: empty SNP batch");
  for (const int m : snp_batch)
    if (m < 0 || m >= state.snps) throw DimensionError("stage1_step: SNP index out of range");

  const double lik_scale =
      static_cast<double>(state.snps) / static_cast<double>(snp_batch.size());
  const int n = state.individuals;
  const auto k = static_cast<Eigen::Index>(state.config.latent_dim);
  const auto batch_len = static_cast<Eigen::Index>(snp_batch.size());
  const bool neural = state.phi.kind == model::SnpModelKind::kNeural;
  const num::MlpSpec phi_spec = state.config.snp_net_spec();

  // Pass A: update the SNP-side blocks (w rows of this batch, phi) from a
  // first sample, holding z fixed.
  const std::vector<int> everyone = all_indices(n);
  StepStats stats;
  {
    num::RngStream noise_rng = step_rng.split(0);
    Matrix g_mu_w = Matrix::Zero(batch_len, k);
    Matrix g_ls_w = Matrix::Zero(batch_len, k);
    Vector g_phi;
    EvalRequest req;
    req.want_w = true;
    req.want_phi = neural;
    for (int s = 0; s < config.mc_samples; ++s) {
      num::RngStream sample_rng = noise_rng.split(static_cast<std::uint64_t>(s));
      const Matrix noise_z = draw_noise(n, k, sample_rng);
      const Matrix noise_w = draw_noise(batch_len, k, sample_rng);
      const EvalResult res =
          stage1_eval(x, state.config, everyone, snp_batch, state.mu_z,
                      state.log_sigma_z, state.mu_w, state.log_sigma_w, state.phi,
                      noise_z, noise_w, lik_scale, req);
      g_mu_w += res.g_mu_w;
      g_ls_w += res.g_ls_w;
      if (neural) {
        if (g_phi.size() == 0) g_phi = Vector::Zero(res.g_phi_flat.size());
        g_phi += res.g_phi_flat;
      }
      stats.elbo += res.value();
      stats.xlik += res.xlik;
      stats.w_terms += res.w_terms;
      stats.z_terms += res.z_terms;
    }
    const double inv_s = 1.0 / static_cast<double>(config.mc_samples);
    g_mu_w *= inv_s;
    g_ls_w *= inv_s;
    stats.elbo *= inv_s;
    stats.xlik *= inv_s;
    stats.w_terms *= inv_s;
    stats.z_terms *= inv_s;
    check_finite_block(g_mu_w, "mu_w");
    check_finite_block(g_ls_w, "log_sigma_w");
    if (config.step_size > 0.0) {
      num::adam_step_rows(state.opt_mu_w, state.mu_w, snp_batch, g_mu_w);
      num::adam_step_rows(state.opt_ls_w, state.log_sigma_w, snp_batch, g_ls_w);
      clamp_log_sigma_rows(state.log_sigma_w, snp_batch);
      if (neural) {
        g_phi *= inv_s;
        if (!g_phi.allFinite())
          throw NumericError("stage1_step: non-finite gradient in block phi");
        Vector phi_flat = num::flatten(phi_spec, state.phi.net);
        num::adam_step(state.opt_phi, phi_flat, g_phi);
        num::unflatten(phi_spec, phi_flat, state.phi.net);
      }
    }
  }

  // Pass B: update the z rows from a second sample.
  {
    num::RngStream pass_rng = step_rng.split(1);
    std::vector<int> ind;
    if (config.individual_batch > 0 && config.individual_batch < n) {
      const std::vector<int> perm = pass_rng.split(0).permutation(n);
      ind.assign(perm.begin(), perm.begin() + config.individual_batch);
    } else {
      ind = everyone;
    }
    num::RngStream noise_rng = pass_rng.split(1);
    const auto ind_len = static_cast<Eigen::Index>(ind.size());
    Matrix g_mu_z = Matrix::Zero(ind_len, k);
    Matrix g_ls_z = Matrix::Zero(ind_len, k);
    EvalRequest req;
    req.want_z = true;
    for (int s = 0; s < config.mc_samples; ++s) {
      num::RngStream sample_rng = noise_rng.split(static_cast<std::uint64_t>(s));
      const Matrix noise_z = draw_noise(ind_len, k, sample_rng);
      const Matrix noise_w = draw_noise(batch_len, k, sample_rng);
      const EvalResult res =
          stage1_eval(x, state.config, ind, snp_batch, state.mu_z, state.log_sigma_z,
                      state.mu_w, state.log_sigma_w, state.phi, noise_z, noise_w,
                      lik_scale, req);
      g_mu_z += res.g_mu_z;
      g_ls_z += res.g_ls_z;
    }
    const double inv_s = 1.0 / static_cast<double>(config.mc_samples);
    g_mu_z *= inv_s;
    g_ls_z *= inv_s;
    check_finite_block(g_mu_z, "mu_z");
    check_finite_block(g_ls_z, "log_sigma_z");
    if (config.z_step() > 0.0) {
      num::adam_step_rows(state.opt_mu_z, state.mu_z, ind, g_mu_z);
      num::adam_step_rows(state.opt_ls_z, state.log_sigma_z, ind, g_ls_z);
      clamp_log_sigma_rows(state.log_sigma_z, ind);
    }
  }
  return stats;
}

VariationalState stage1_init(const model::IcmConfig& config, int individuals, int snps,
                             std::uint64_t seed) {
  config.validate();
  if (individuals <= 0 || snps <= 0)
    throw DimensionError("stage1_init: dimensions must be positive");

  VariationalState st;
  st.config = config;
  st.individuals = individuals;
  st.snps = snps;
  st.stage1_seed = seed;

  num::RngStream init_rng = num::RngStream(seed).split(kKeyInit);
  const auto k = static_cast<Eigen::Index>(config.latent_dim);
  // Small-noise means, log_sigma = -2 everywhere.
  num::RngStream z_rng = init_rng.split(0);
  st.mu_z = 0.1 * draw_noise(individuals, k, z_rng);
  st.log_sigma_z = Matrix::Constant(individuals, k, -2.0);
  num::RngStream w_rng = init_rng.split(1);
  st.mu_w = 0.1 * draw_noise(snps, k, w_rng);
  st.log_sigma_w = Matrix::Constant(snps, k, -2.0);

  num::RngStream phi_rng = init_rng.split(2);
  st.phi = model::init_snp_params(config, phi_rng);
  num::RngStream theta_rng = init_rng.split(3);
  st.theta = model::init_trait_params(config, snps, theta_rng);

  num::AdamConfig adam;
  st.opt_mu_z = num::make_adam(st.mu_z.size(), adam);
  st.opt_ls_z = num::make_adam(st.log_sigma_z.size(), adam);
  st.opt_mu_w = num::make_adam(st.mu_w.size(), adam);
  st.opt_ls_w = num::make_adam(st.log_sigma_w.size(), adam);
  if (config.snp_model == model::SnpModelKind::kNeural)
    st.opt_phi = num::make_adam(num::param_count(config.snp_net_spec()), adam);
  st.opt_theta = num::make_adam(
      config.trait_model == model::TraitModelKind::kLinear
          ? static_cast<Eigen::Index>(snps + config.latent_dim)
          : static_cast<Eigen::Index>(num::param_count(config.trait_net_spec(snps))),
      adam);
  return st;
}

void stage1_run_epochs(VariationalState& state, const GenotypeMatrix& x,
                       const Stage1Config& config, int target_epochs,
                       std::vector<MetricRow>* metrics,
                       std::vector<double>* step_elbos) {
  config.validate();
  if (x.individuals() != state.individuals || x.snps() != state.snps)
    throw DimensionError("stage1_run_epochs: data does not match state dims");

  num::AdamConfig adam;
  adam.step_size = config.step_size;
  state.opt_mu_w.config = adam;
  state.opt_ls_w.config = adam;
  state.opt_phi.config = adam;
  adam.step_size = config.z_step();
  state.opt_mu_z.config = adam;
  state.opt_ls_z.config = adam;

  num::RngStream stage_rng = num::RngStream(config.seed).split(kKeyStage1);
  const int m = state.snps;
  const int batch = std::min(config.snp_batch, m);

  for (int epoch = state.stage1_epochs_done; epoch < target_epochs; ++epoch) {
    num::RngStream epoch_rng = stage_rng.split(static_cast<std::uint64_t>(epoch));
    const std::vector<int> order = epoch_rng.split(0).permutation(m);
    StepStats epoch_sum;
    int steps = 0;
    for (int start = 0; start < m; start += batch) {
      const int len = std::min(batch, m - start);
      const std::vector<int> snp_batch(order.begin() + start,
                                       order.begin() + start + len);
      num::RngStream step_rng = epoch_rng.split(1 + static_cast<std::uint64_t>(steps));
      const StepStats s = stage1_step(x, snp_batch, state, config, step_rng);
      epoch_sum.elbo += s.elbo;
      epoch_sum.xlik += s.xlik;
      epoch_sum.w_terms += s.w_terms;
      epoch_sum.z_terms += s.z_terms;
      if (step_elbos) step_elbos->push_back(s.elbo);
      ++steps;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    if (metrics) {
      metrics->push_back({1, epoch, "elbo", epoch_sum.elbo * inv});
      metrics->push_back({1, epoch, "xlik", epoch_sum.xlik * inv});
      metrics->push_back({1, epoch, "w_terms", epoch_sum.w_terms * inv});
      metrics->push_back({1, epoch, "z_terms", epoch_sum.z_terms * inv});
    }
    state.stage1_epochs_done = epoch + 1;
  }
}

VariationalState stage1_fit(const GenotypeMatrix& x, const model::IcmConfig& config,
                            const Stage1Config& stage1, std::vector<MetricRow>* metrics,
                            std::vector<double>* step_elbos) {
  VariationalState state = stage1_init(config, x.individuals(), x.snps(), stage1.seed);
  stage1_run_epochs(state, x, stage1, stage1.epochs, metrics, step_elbos);
  return state;
}

namespace {

// Dense double copy of the full genotype matrix (stage 2 uses all SNPs).
Matrix geno_dense(const GenotypeMatrix& x) {
  Matrix out(x.individuals(), x.snps());
  for (int n = 0; n < x.individuals(); ++n)
    for (int m = 0; m < x.snps(); ++m) out(n, m) = static_cast<double>(x(n, m));
  return out;
}

Vector theta_flat(const VariationalState& state) {
  if (state.theta.kind == model::TraitModelKind::kLinear) return state.theta.coef;
  return num::flatten(state.config.trait_net_spec(state.snps), state.theta.net);
}

void theta_unflatten(VariationalState& state, const Vector& flat) {
  if (state.theta.kind == model::TraitModelKind::kLinear) {
    state.theta.coef = flat;
    return;
  }
  num::unflatten(state.config.trait_net_spec(state.snps), flat, state.theta.net);
}

Vector prior_grad_flat(const VariationalState& state, double* prior_value) {
  model::TraitModelParams grad;
  const double v = model::group_lasso_log_prior(state.config, state.theta,
                                                state.config.group_lasso_scale, &grad);
  if (prior_value) *prior_value = v;
  if (state.theta.kind == model::TraitModelKind::kLinear) return grad.coef;
  return num::flatten(state.config.trait_net_spec(state.snps), grad.net);
}

std::vector<int> stage2_minibatch(int n, int batch, num::RngStream& rng) {
  if (batch <= 0 || batch >= n) return all_indices(n);
  const std::vector<int> perm = rng.permutation(n);
  return {perm.begin(), perm.begin() + batch};
}

}  // namespace

void stage2_fit_tractable(const GenotypeMatrix& x, const Vector& y,
                          VariationalState& state, const Stage2Config& config,
                          std::vector<MetricRow>* metrics) {
  config.validate();
  if (state.config.trait_kind == model::TraitKind::kRealImplicit)
    throw ConfigError(
        "stage2_fit_tractable: implicit trait kind has no tractable density; use "
        "stage2_fit_lfvi");
  if (y.size() != state.individuals)
    throw DimensionError("stage2_fit_tractable: trait length mismatch");
  if (x.individuals() != state.individuals || x.snps() != state.snps)
    throw DimensionError("stage2_fit_tractable: data does not match state dims");
  const bool categorical = state.config.trait_kind == model::TraitKind::kCategorical;
  if (categorical)
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const int level = static_cast<int>(y(i));
      if (y(i) != static_cast<double>(level) || level < 0 ||
          level >= state.config.categorical_levels)
        throw DomainError("stage2_fit_tractable: trait values must be valid levels");
    }

  state.opt_theta.config.step_size = config.step_size;
  const Matrix x_dense = geno_dense(x);
  num::RngStream stage_rng = num::RngStream(config.seed).split(kKeyStage2);
  constexpr double kLog2Pi = 1.8378770664093453;

  const int target = state.stage2_epochs_done + config.epochs;
  for (int epoch = state.stage2_epochs_done; epoch < target; ++epoch) {
    num::RngStream epoch_rng = stage_rng.split(static_cast<std::uint64_t>(epoch));
    num::RngStream batch_rng = epoch_rng.split(0);
    const std::vector<int> ind =
        stage2_minibatch(state.individuals, config.individual_batch, batch_rng);
    const double lik_scale =
        static_cast<double>(state.individuals) / static_cast<double>(ind.size());

    const Matrix x_b = rows_of(x_dense, ind);
    Vector y_b(static_cast<Eigen::Index>(ind.size()));
    for (std::size_t i = 0; i < ind.size(); ++i) y_b(static_cast<Eigen::Index>(i)) = y(ind[i]);

    Vector grad_total;
    double objective = 0.0;
    num::RngStream noise_rng = epoch_rng.split(1);
    for (int s = 0; s < config.mc_samples; ++s) {
      num::RngStream sample_rng = noise_rng.split(static_cast<std::uint64_t>(s));
      const Matrix noise_z = draw_noise(static_cast<Eigen::Index>(ind.size()),
                                        state.config.latent_dim, sample_rng);
      const Matrix z_s = rows_of(state.mu_z, ind) +
                         rows_of(state.log_sigma_z, ind).array().exp().matrix()
                             .cwiseProduct(noise_z);

      model::TraitBatch fwd = model::trait_forward_batch(x_b, z_s, Vector(),
                                                         state.config, state.theta, true);
      double loglik = 0.0;
      Vector g_loc(fwd.location.size());
      if (categorical) {
        for (Eigen::Index i = 0; i < fwd.location.size(); ++i) {
          const int level = static_cast<int>(y_b(i));
          loglik += model::categorical_log_pmf(level, fwd.location(i),
                                               state.config.categorical_levels);
          g_loc(i) = model::categorical_log_pmf_grad(level, fwd.location(i),
                                                     state.config.categorical_levels);
        }
      } else {
        const Vector resid = y_b - fwd.location;
        loglik = -0.5 * (resid.squaredNorm() +
                         static_cast<double>(resid.size()) * kLog2Pi);
        g_loc = resid;
      }

      Vector g_theta;
      if (state.theta.kind == model::TraitModelKind::kLinear) {
        g_theta.resize(state.snps + state.config.latent_dim);
        g_theta.head(state.snps) = x_b.transpose() * g_loc;
        g_theta.tail(state.config.latent_dim) = z_s.transpose() * g_loc;
      } else {
        const num::MlpSpec spec = state.config.trait_net_spec(state.snps);
        const num::MlpGrads g =
            num::mlp_backward(spec, state.theta.net, fwd.cache, g_loc);
        g_theta = num::flatten(spec, g.params);
      }
      if (grad_total.size() == 0) grad_total = Vector::Zero(g_theta.size());
      grad_total += lik_scale * g_theta;
      objective += lik_scale * loglik;
    }
    const double inv_s = 1.0 / static_cast<double>(config.mc_samples);
    grad_total *= inv_s;
    objective *= inv_s;

    double prior_value = 0.0;
    grad_total += prior_grad_flat(state, &prior_value);
    objective += prior_value;

    if (!grad_total.allFinite() || !std::isfinite(objective))
      throw NumericError("stage2_fit_tractable: non-finite objective or gradient");
    if (config.step_size > 0.0) {
      Vector flat = theta_flat(state);
      num::adam_step(state.opt_theta, flat, grad_total);
      theta_unflatten(state, flat);
    }
    if (metrics) metrics->push_back({2, epoch, "objective", objective});
    state.stage2_epochs_done = epoch + 1;
  }
  state.theta_fitted = state.theta_fitted || config.epochs > 0;
}

num::MlpSpec ratio_net_spec(int trait_hidden1, int ratio_hidden1, int ratio_hidden2) {
  num::MlpSpec spec;
  spec.input_dim = 1 + trait_hidden1;
  spec.hidden1 = ratio_hidden1;
  spec.hidden2 = ratio_hidden2;
  spec.output_dim = 1;
  spec.batch_norm = false;
  spec.skip_prefix = 0;
  return spec;
}

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  return t < 0.0 ? std::exp(t) / (1.0 + std::exp(t)) : 1.0 / (1.0 + std::exp(-t));
}

Matrix ratio_input(const Vector& y, const Matrix& h1) {
  Matrix input(y.size(), 1 + h1.cols());
  input.col(0) = y;
  input.rightCols(h1.cols()) = h1;
  return input;
}

}  // namespace

Vector ratio_forward(const num::MlpSpec& ratio_spec, num::MlpParams& ratio,
                     const Vector& y, const Matrix& h1) {
  if (h1.rows() != y.size()) throw DimensionError("ratio_forward: row mismatch");
  return num::mlp_forward(ratio_spec, ratio, ratio_input(y, h1), false).col(0);
}

RatioLossResult ratio_loss(const num::MlpSpec& ratio_spec, num::MlpParams& ratio,
                           const Vector& y_real, const Vector& y_fake,
                           const Matrix& h1) {
  if (y_real.size() != y_fake.size() || h1.rows() != y_real.size())
    throw DimensionError("ratio_loss: batch size mismatch");
  const Eigen::Index n = y_real.size();
  if (n == 0) throw DimensionError("ratio_loss: empty batch");

  // Model rows first, data rows second; both share the h1 features.
  Matrix input(2 * n, ratio_spec.input_dim);
  input.topRows(n) = ratio_input(y_fake, h1);
  input.bottomRows(n) = ratio_input(y_real, h1);

  num::MlpCache cache;
  const Matrix r = num::mlp_forward(ratio_spec, ratio, input, true, &cache);

  RatioLossResult out;
  Matrix grad_r(2 * n, 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.loss += softplus(-r(i, 0)) * inv_n;            // model rows: -log sigmoid(r)
    out.loss += softplus(r(n + i, 0)) * inv_n;         // data rows: -log(1 - sigmoid(r))
    grad_r(i, 0) = -(1.0 - sigmoid(r(i, 0))) * inv_n;
    grad_r(n + i, 0) = sigmoid(r(n + i, 0)) * inv_n;
  }
  const num::MlpGrads g = num::mlp_backward(ratio_spec, ratio, cache, grad_r);
  out.grad = g.params;
  out.grad_y_fake = g.input.col(0).head(n);
  return out;
}

void stage2_fit_lfvi(const GenotypeMatrix& x, const Vector& y, VariationalState& state,
                     const Stage2Config& config, std::vector<MetricRow>* metrics) {
  config.validate();
  if (state.config.trait_kind != model::TraitKind::kRealImplicit)
    throw ConfigError(
        "stage2_fit_lfvi: trait kind has a tractable density; use stage2_fit_tractable");
  if (y.size() != state.individuals)
    throw DimensionError("stage2_fit_lfvi: trait length mismatch");
  if (x.individuals() != state.individuals || x.snps() != state.snps)
    throw DimensionError("stage2_fit_lfvi: data does not match state dims");

  const num::MlpSpec trait_spec = state.config.trait_net_spec(state.snps);
  const num::MlpSpec r_spec =
      ratio_net_spec(state.config.trait_hidden1, config.ratio_hidden1, config.ratio_hidden2);
  num::RngStream stage_rng = num::RngStream(config.seed).split(kKeyStage2);

  if (!state.ratio_allocated) {
    num::RngStream init_rng = num::RngStream(config.seed).split(kKeyRatioInit);
    state.ratio = num::he_init(r_spec, init_rng);
    state.opt_ratio = num::make_adam(num::param_count(r_spec));
    state.ratio_allocated = true;
    state.ratio_hidden1 = config.ratio_hidden1;
    state.ratio_hidden2 = config.ratio_hidden2;
  } else if (state.ratio_hidden1 != config.ratio_hidden1 ||
             state.ratio_hidden2 != config.ratio_hidden2) {
    throw ConfigError("stage2_fit_lfvi: ratio hidden sizes differ from the allocated net");
  }
  state.opt_ratio.config.step_size = config.step_size;
  state.opt_theta.config.step_size = config.step_size;

  const Matrix x_dense = geno_dense(x);

  // The alternating game oscillates around its equilibrium rather than
  // settling; decaying the generator's step over the final third of this
  // call's epochs (linearly down to 10%) shrinks the oscillation so the
  // final iterate sits near the equilibrium.  The discriminator keeps its
  // full step so the generator's shrinking moves follow a sharp ratio.
  const int target = state.stage2_epochs_done + config.epochs;
  const int decay_from = target - std::max(1, config.epochs / 3);

  for (int epoch = state.stage2_epochs_done; epoch < target; ++epoch) {
    if (epoch >= decay_from) {
      const double frac = static_cast<double>(epoch - decay_from + 1) /
                          static_cast<double>(target - decay_from);
      state.opt_theta.config.step_size = config.step_size * (1.0 - 0.9 * frac);
    }
    num::RngStream epoch_rng = stage_rng.split(static_cast<std::uint64_t>(epoch));
    num::RngStream batch_rng = epoch_rng.split(0);
    const std::vector<int> ind =
        stage2_minibatch(state.individuals, config.individual_batch, batch_rng);
    const auto b = static_cast<Eigen::Index>(ind.size());
    const double lik_scale =
        static_cast<double>(state.individuals) / static_cast<double>(ind.size());

    const Matrix x_b = rows_of(x_dense, ind);
    Vector y_b(b);
    for (std::size_t i = 0; i < ind.size(); ++i) y_b(static_cast<Eigen::Index>(i)) = y(ind[i]);
    const Matrix mu_z_b = rows_of(state.mu_z, ind);
    const Matrix sig_z_b = rows_of(state.log_sigma_z, ind).array().exp();

    auto sample_fake = [&](num::RngStream& rng) {
      const Matrix noise_z = draw_noise(b, state.config.latent_dim, rng);
      Vector eps(b);
      for (Eigen::Index i = 0; i < b; ++i) eps(i) = rng.normal();
      const Matrix z_s = mu_z_b + sig_z_b.cwiseProduct(noise_z);
      model::TraitBatch fwd =
          model::trait_forward_batch(x_b, z_s, eps, state.config, state.theta, true);
      return fwd;
    };

    // Discriminator updates; each step averages the loss gradient over
    // config.mc_samples independent fake draws.
    num::RngStream ratio_rng = epoch_rng.split(1);
    const double inv_mc = 1.0 / static_cast<double>(config.mc_samples);
    double last_loss = 0.0;
    for (int step = 0; step < config.ratio_steps; ++step) {
      num::RngStream step_rng = ratio_rng.split(static_cast<std::uint64_t>(step));
      double loss = 0.0;
      Vector g = Vector::Zero(num::param_count(r_spec));
      for (int draw = 0; draw < config.mc_samples; ++draw) {
        num::RngStream rng = step_rng.split(static_cast<std::uint64_t>(draw));
        const model::TraitBatch fwd = sample_fake(rng);
        const RatioLossResult rl =
            ratio_loss(r_spec, state.ratio, y_b, fwd.location, fwd.hidden1);
        if (!std::isfinite(rl.loss))
          throw NumericError("stage2_fit_lfvi: non-finite ratio loss");
        loss += inv_mc * rl.loss;
        g -= inv_mc * num::flatten(r_spec, rl.grad);  // descend the loss
      }
      if (config.step_size > 0.0) {
        Vector flat = num::flatten(r_spec, state.ratio);
        num::adam_step(state.opt_ratio, flat, g);
        num::unflatten(r_spec, flat, state.ratio);
      }
      last_loss = loss;
    }

    // Generator updates: treating r(y, h1) as an unnormalized log-density
    // surrogate in theta, the likelihood-ascent gradient is the data term
    // minus the model-sample term,
    //   F = sum_n [ r(y_n, h1_n) - r(y_fake_n, h1_n) ] + log p(theta),
    // ascended in theta.  The data rows anchor the features (gradient via
    // h1 only, y_n being observed); the model rows supply the correction
    // (gradient via y_fake and h1).  F is maximal when model samples are
    // indistinguishable from data given the shared features.
    num::RngStream gen_rng = epoch_rng.split(2);
    double last_proxy = 0.0;
    for (int step = 0; step < config.generator_steps; ++step) {
      num::RngStream step_rng = gen_rng.split(static_cast<std::uint64_t>(step));
      double proxy = 0.0;
      Vector grad_total = Vector::Zero(num::param_count(trait_spec));
      for (int draw = 0; draw < config.mc_samples; ++draw) {
        num::RngStream rng = step_rng.split(static_cast<std::uint64_t>(draw));
        model::TraitBatch fwd = sample_fake(rng);

        // Model rows first, data rows second, mirroring ratio_loss.
        Matrix r_in(2 * b, r_spec.input_dim);
        r_in.topRows(b) = ratio_input(fwd.location, fwd.hidden1);
        r_in.bottomRows(b) = ratio_input(y_b, fwd.hidden1);
        num::MlpCache r_cache;
        const Matrix r = num::mlp_forward(r_spec, state.ratio, r_in, true, &r_cache);
        proxy += inv_mc * lik_scale *
                 (r.col(0).tail(b).sum() - r.col(0).head(b).sum());
        Matrix r_out_grad(2 * b, 1);
        r_out_grad.topRows(b).setConstant(-inv_mc * lik_scale);
        r_out_grad.bottomRows(b).setConstant(inv_mc * lik_scale);
        const num::MlpGrads r_grads =
            num::mlp_backward(r_spec, state.ratio, r_cache, r_out_grad);

        const Matrix grad_y = r_grads.input.col(0).head(b);
        const Matrix grad_h1 =
            r_grads.input.topRows(b).rightCols(state.config.trait_hidden1) +
            r_grads.input.bottomRows(b).rightCols(state.config.trait_hidden1);
        const num::MlpGrads t_grads =
            num::mlp_backward(trait_spec, state.theta.net, fwd.cache, grad_y, &grad_h1);
        grad_total += num::flatten(trait_spec, t_grads.params);
      }

      double prior_value = 0.0;
      grad_total += prior_grad_flat(state, &prior_value);
      if (!grad_total.allFinite() || !std::isfinite(proxy))
        throw NumericError("stage2_fit_lfvi: non-finite generator gradient");
      if (config.step_size > 0.0) {
        Vector flat = num::flatten(trait_spec, state.theta.net);
        num::adam_step(state.opt_theta, flat, grad_total);
        num::unflatten(trait_spec, flat, state.theta.net);
      }
      last_proxy = proxy + prior_value;
    }

    if (metrics) {
      metrics->push_back({2, epoch, "ratio_loss", last_loss});
      metrics->push_back({2, epoch, "proxy", last_proxy});
    }
    state.stage2_epochs_done = epoch + 1;
  }
  state.theta_fitted = state.theta_fitted || config.epochs > 0;
}

}  // namespace icm::lfvi
