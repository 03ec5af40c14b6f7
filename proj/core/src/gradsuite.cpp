#include "icm/gradsuite.hpp"

#include <algorithm>

#include "icm/errors.hpp"
#include "icm/gradcheck.hpp"
#include "icm/genotype.hpp"
#include "icm/lfvi.hpp"
#include "icm/mlp.hpp"
#include "icm/model.hpp"
#include "icm/rng.hpp"

namespace icm::num {

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng,
                     double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

Vector random_vector(Eigen::Index n, RngStream& rng, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

// Moves an initialized network off the degenerate points that make central
// finite differences unusable: zero biases put whole rows of a hidden layer
// exactly on the ReLU kink (a dead first layer row gives pre2 == b2 == 0),
// and zero batch-norm shifts do the same to the normalized activations.
void randomize_mlp(const MlpSpec& spec, MlpParams& params, RngStream& rng) {
  params.b1 += random_vector(params.b1.size(), rng, 0.5);
  params.b2 += random_vector(params.b2.size(), rng, 0.5);
  params.b3 += random_vector(params.b3.size(), rng, 0.5);
  if (spec.batch_norm) {
    params.bn1.scale += random_vector(params.bn1.scale.size(), rng, 0.3);
    params.bn1.shift += random_vector(params.bn1.shift.size(), rng, 0.3);
    params.bn2.scale += random_vector(params.bn2.scale.size(), rng, 0.3);
    params.bn2.shift += random_vector(params.bn2.shift.size(), rng, 0.3);
  }
}

// Parameter coordinates with a non-constant effect on the network output.
// Batch normalization subtracts the per-feature batch mean, so the hidden
// biases b1/b2 cancel exactly: their true gradient is identically zero and a
// finite-difference probe measures nothing but roundoff there.  They are
// excluded from the checked vector; everything else is included.
Eigen::Index live_param_count(const MlpSpec& spec) {
  Eigen::Index n = param_count(spec);
  if (spec.batch_norm) n -= spec.hidden1 + spec.hidden2;
  return n;
}

Vector pack_live(const MlpSpec& spec, const MlpParams& params) {
  const Vector full = flatten(spec, params);
  if (!spec.batch_norm) return full;
  Vector out(live_param_count(spec));
  Eigen::Index at = 0, src = 0;
  const Eigen::Index w1n = spec.hidden1 * spec.input_dim;
  out.segment(at, w1n) = full.segment(src, w1n);
  at += w1n;
  src += w1n + spec.hidden1;  // skip b1
  const Eigen::Index w2n = spec.hidden2 * spec.hidden1;
  out.segment(at, w2n) = full.segment(src, w2n);
  at += w2n;
  src += w2n + spec.hidden2;  // skip b2
  const Eigen::Index rest = full.size() - src;
  out.segment(at, rest) = full.segment(src, rest);
  return out;
}

void unpack_live(const MlpSpec& spec, const Vector& v, MlpParams& params) {
  if (!spec.batch_norm) {
    unflatten(spec, v, params);
    return;
  }
  Vector full = flatten(spec, params);  // keeps the frozen b1/b2 values
  Eigen::Index at = 0, dst = 0;
  const Eigen::Index w1n = spec.hidden1 * spec.input_dim;
  full.segment(dst, w1n) = v.segment(at, w1n);
  at += w1n;
  dst += w1n + spec.hidden1;
  const Eigen::Index w2n = spec.hidden2 * spec.hidden1;
  full.segment(dst, w2n) = v.segment(at, w2n);
  at += w2n;
  dst += w2n + spec.hidden2;
  const Eigen::Index rest = full.size() - dst;
  full.segment(dst, rest) = v.segment(at, rest);
  unflatten(spec, full, params);
}

// MLP with batch norm and skip connection: weighted-sum loss on the output,
// optionally plus a weighted sum over the first hidden activation (the
// injection path the trait-model generator gradient uses).
double check_mlp(RngStream rng, int instance) {
  MlpSpec spec;
  spec.input_dim = 5;
  spec.hidden1 = 4;
  spec.hidden2 = 3;
  spec.output_dim = 1;
  spec.batch_norm = instance % 2 == 0;
  spec.skip_prefix = instance % 3 == 0 ? 2 : 0;
  const Eigen::Index batch = 3;

  MlpParams params = he_init(spec, rng);
  randomize_mlp(spec, params, rng);
  const Matrix input = random_matrix(batch, spec.input_dim, rng);
  const Matrix out_w = random_matrix(batch, spec.output_dim, rng);
  const bool inject = instance % 2 == 1;
  const Matrix act1_w = inject ? random_matrix(batch, spec.hidden1, rng) : Matrix();

  auto loss_at = [&](const MlpParams& p, const Matrix& in) {
    MlpParams local = p;
    MlpCache cache;
    const Matrix y = mlp_forward(spec, local, in, true, &cache);
    double value = y.cwiseProduct(out_w).sum();
    if (inject) value += cache.act1.cwiseProduct(act1_w).sum();
    return value;
  };

  // Analytic gradients for both parameters and the input.
  MlpParams work = params;
  MlpCache cache;
  mlp_forward(spec, work, input, true, &cache);
  const MlpGrads grads =
      mlp_backward(spec, params, cache, out_w, inject ? &act1_w : nullptr);

  // gradient_check reads the analytic gradient from the unperturbed call and
  // only the value from perturbed ones, so closing over `grads` is exact.
  const Vector at = pack_live(spec, params);
  double err = gradient_check(
      [&](const Vector& v) {
        MlpParams p = params;
        unpack_live(spec, v, p);
        return ValueGrad{loss_at(p, input), pack_live(spec, grads.params)};
      },
      at);

  Vector input_flat(input.size());
  for (Eigen::Index j = 0, k = 0; j < input.cols(); ++j)
    for (Eigen::Index i = 0; i < input.rows(); ++i, ++k) input_flat(k) = input(i, j);
  Vector grad_input_flat(input.size());
  for (Eigen::Index j = 0, k = 0; j < input.cols(); ++j)
    for (Eigen::Index i = 0; i < input.rows(); ++i, ++k)
      grad_input_flat(k) = grads.input(i, j);
  err = std::max(err, gradient_check(
                          [&](const Vector& v) {
                            Matrix in = input;
                            for (Eigen::Index j = 0, k = 0; j < in.cols(); ++j)
                              for (Eigen::Index i = 0; i < in.rows(); ++i, ++k)
                                in(i, j) = v(k);
                            return ValueGrad{loss_at(params, in), grad_input_flat};
                          },
                          input_flat));
  return err;
}

double check_binomial_log_pmf(RngStream rng, int /*instance*/) {
  const Eigen::Index n = 8;
  Vector logits = random_vector(n, rng, 2.0);
  std::vector<int> x(static_cast<std::size_t>(n));
  for (auto& xi : x) xi = static_cast<int>(rng.uniform_index(3));

  return gradient_check(
      [&](const Vector& v) {
        double value = 0.0;
        Vector grad(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          value += model::snp_log_prob(x[static_cast<std::size_t>(i)], v(i));
          grad(i) = model::snp_log_prob_grad(x[static_cast<std::size_t>(i)], v(i));
        }
        return ValueGrad{value, grad};
      },
      logits);
}

double check_categorical_log_pmf(RngStream rng, int instance) {
  const int levels = 2 + instance % 5;
  const Eigen::Index n = 6;
  // Levels come from the model itself (discretized location plus noise), as
  // they do in real data.  An arbitrary (level, location) pair can have a bin
  // probability below double precision, where the value is flat but the
  // analytic tail gradient is not — a regime no finite difference can probe.
  Vector locations = random_vector(n, rng, 1.5);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] =
        model::categorical_discretize(locations(i) + 0.8 * rng.normal(), levels);

  return gradient_check(
      [&](const Vector& v) {
        double value = 0.0;
        Vector grad(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          value += model::categorical_log_pmf(y[static_cast<std::size_t>(i)], v(i), levels);
          grad(i) =
              model::categorical_log_pmf_grad(y[static_cast<std::size_t>(i)], v(i), levels);
        }
        return ValueGrad{value, grad};
      },
      locations);
}

double check_group_lasso(RngStream rng, int instance) {
  model::IcmConfig config;
  config.latent_dim = 2;
  config.trait_hidden1 = 3;
  config.trait_hidden2 = 2;
  config.group_lasso_scale = 0.7;
  const int snps = 4;
  const bool neural = instance % 2 == 1;
  config.trait_model =
      neural ? model::TraitModelKind::kNeural : model::TraitModelKind::kLinear;
  if (neural) config.trait_kind = model::TraitKind::kRealImplicit;

  model::TraitModelParams theta = model::init_trait_params(config, snps, rng);
  if (!neural) theta.coef = random_vector(theta.coef.size(), rng);

  const MlpSpec spec = config.trait_net_spec(snps);
  auto pack = [&](const model::TraitModelParams& p) {
    return neural ? flatten(spec, p.net) : p.coef;
  };
  auto unpack = [&](const Vector& v) {
    model::TraitModelParams p = theta;
    if (neural)
      unflatten(spec, v, p.net);
    else
      p.coef = v;
    return p;
  };

  return gradient_check(
      [&](const Vector& v) {
        const model::TraitModelParams p = unpack(v);
        model::TraitModelParams grad;
        const double value = model::group_lasso_log_prior(
            config, p, config.group_lasso_scale, &grad);
        return ValueGrad{value, pack(grad)};
      },
      pack(theta));
}

double check_entropy_terms(RngStream rng, int /*instance*/) {
  const Eigen::Index k = 4;
  const Vector mu = random_vector(k, rng);
  const Vector log_sigma = random_vector(k, rng, 0.5);
  const Vector noise = random_vector(k, rng);

  Vector at(2 * k);
  at.head(k) = mu;
  at.tail(k) = log_sigma;
  return gradient_check(
      [&](const Vector& v) {
        const Vector m = v.head(k);
        const Vector ls = v.tail(k);
        const Vector sample = m + ls.array().exp().matrix().cwiseProduct(noise);
        const lfvi::EntropyTermsGrad g = lfvi::gaussian_entropy_terms_grad(m, ls, sample);
        Vector grad(2 * k);
        grad.head(k) = g.grad_mu;
        grad.tail(k) = g.grad_log_sigma;
        return ValueGrad{g.value, grad};
      },
      at);
}

// Full reparameterized stage-1 objective at frozen noise, over every
// variational block and (for the neural SNP model) the network parameters.
double check_variational_objective(RngStream rng, int instance) {
  const int n = 4, m = 3, k = 2;
  model::IcmConfig config;
  config.latent_dim = k;
  config.snp_hidden1 = 3;
  config.snp_hidden2 = 2;
  const bool neural = instance % 2 == 1;
  config.snp_model =
      neural ? model::SnpModelKind::kNeural : model::SnpModelKind::kLogisticFa;

  GenotypeMatrix x(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      x(i, j) = static_cast<std::uint8_t>(rng.uniform_index(3));

  const Matrix mu_z = random_matrix(n, k, rng, 0.5);
  const Matrix ls_z = random_matrix(n, k, rng, 0.3);
  const Matrix mu_w = random_matrix(m, k, rng, 0.5);
  const Matrix ls_w = random_matrix(m, k, rng, 0.3);
  model::SnpModelParams phi = model::init_snp_params(config, rng);
  const MlpSpec phi_spec = config.snp_net_spec();
  if (neural) randomize_mlp(phi_spec, phi.net, rng);
  const Matrix noise_z = random_matrix(n, k, rng);
  const Matrix noise_w = random_matrix(m, k, rng);

  const Eigen::Index phi_len = neural ? live_param_count(phi_spec) : 0;
  const Eigen::Index zlen = n * k, wlen = m * k;

  auto unpack_mat = [](const Vector& v, Eigen::Index offset, Eigen::Index rows,
                       Eigen::Index cols) {
    Matrix out(rows, cols);
    for (Eigen::Index j = 0, idx = offset; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i, ++idx) out(i, j) = v(idx);
    return out;
  };
  auto pack_mat = [](Vector& v, Eigen::Index offset, const Matrix& m_in) {
    for (Eigen::Index j = 0, idx = offset; j < m_in.cols(); ++j)
      for (Eigen::Index i = 0; i < m_in.rows(); ++i, ++idx) v(idx) = m_in(i, j);
  };

  Vector at(2 * zlen + 2 * wlen + phi_len);
  pack_mat(at, 0, mu_z);
  pack_mat(at, zlen, ls_z);
  pack_mat(at, 2 * zlen, mu_w);
  pack_mat(at, 2 * zlen + wlen, ls_w);
  if (neural) at.tail(phi_len) = pack_live(phi_spec, phi.net);

  return gradient_check(
      [&](const Vector& v) {
        const Matrix a_mu_z = unpack_mat(v, 0, n, k);
        const Matrix a_ls_z = unpack_mat(v, zlen, n, k);
        const Matrix a_mu_w = unpack_mat(v, 2 * zlen, m, k);
        const Matrix a_ls_w = unpack_mat(v, 2 * zlen + wlen, m, k);
        model::SnpModelParams a_phi = phi;
        if (neural) unpack_live(phi_spec, v.tail(phi_len), a_phi.net);

        const lfvi::Stage1FullGrads g = lfvi::stage1_objective_grads(
            x, config, a_mu_z, a_ls_z, a_mu_w, a_ls_w, a_phi, noise_z, noise_w);
        Vector grad(v.size());
        pack_mat(grad, 0, g.grad_mu_z);
        pack_mat(grad, zlen, g.grad_log_sigma_z);
        pack_mat(grad, 2 * zlen, g.grad_mu_w);
        pack_mat(grad, 2 * zlen + wlen, g.grad_log_sigma_w);
        if (neural) grad.tail(phi_len) = pack_live(phi_spec, g.grad_phi);
        return ValueGrad{g.value, grad};
      },
      at);
}

double check_ratio_loss(RngStream rng, int /*instance*/) {
  const int trait_h1 = 3;
  const MlpSpec spec = lfvi::ratio_net_spec(trait_h1, 4, 3);
  MlpParams ratio = he_init(spec, rng);
  randomize_mlp(spec, ratio, rng);
  const Eigen::Index batch = 5;
  const Vector y_real = random_vector(batch, rng);
  const Vector y_fake = random_vector(batch, rng);
  const Matrix h1 = random_matrix(batch, trait_h1, rng);

  // The softplus terms keep third derivatives small while the loss itself
  // sits near 2·log 2, so a wider step trades negligible truncation error
  // for much less cancellation noise on small-gradient coordinates.
  const double step = 3e-5;

  // Parameter gradients.
  double err = gradient_check(
      [&](const Vector& v) {
        MlpParams p = ratio;
        unflatten(spec, v, p);
        const lfvi::RatioLossResult r = lfvi::ratio_loss(spec, p, y_real, y_fake, h1);
        return ValueGrad{r.loss, flatten(spec, r.grad)};
      },
      flatten(spec, ratio), step);

  // Gradient through the model-sample inputs.
  err = std::max(err, gradient_check(
                          [&](const Vector& v) {
                            const lfvi::RatioLossResult r =
                                lfvi::ratio_loss(spec, ratio, y_real, v, h1);
                            return ValueGrad{r.loss, r.grad_y_fake};
                          },
                          y_fake, step));
  return err;
}

}  // namespace

std::vector<GradSuiteRow> run_gradient_suite(int instances, double tolerance,
                                             std::uint64_t seed) {
  if (instances < 1) throw DomainError("run_gradient_suite: instances must be >= 1");
  struct Op {
    const char* name;
    double (*check)(RngStream, int);
  };
  const Op ops[] = {
      {"mlp_forward_backward", &check_mlp},
      {"binomial_log_pmf", &check_binomial_log_pmf},
      {"categorical_log_pmf", &check_categorical_log_pmf},
      {"group_lasso_prior", &check_group_lasso},
      {"gaussian_entropy_terms", &check_entropy_terms},
      {"variational_objective", &check_variational_objective},
      {"ratio_loss", &check_ratio_loss},
  };

  RngStream root(seed);
  std::vector<GradSuiteRow> rows;
  std::uint64_t op_key = 0;
  for (const Op& op : ops) {
    RngStream op_rng = root.split(op_key++);
    GradSuiteRow row;
    row.op = op.name;
    row.instances = instances;
    for (int i = 0; i < instances; ++i)
      row.max_rel_err =
          std::max(row.max_rel_err,
                   op.check(op_rng.split(static_cast<std::uint64_t>(i)), i));
    row.pass = row.max_rel_err <= tolerance;
    rows.push_back(std::move(row));
  }
  return rows;
}

bool gradient_suite_passed(const std::vector<GradSuiteRow>& rows) {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const GradSuiteRow& r) { return r.pass; });
}

}  // namespace icm::num
