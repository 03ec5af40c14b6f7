// Generative model pieces: priors, SNP logits and log-pmf, trait forward
// passes, ordered-categorical discretization, group-lasso prior.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "icm/errors.hpp"
#include "icm/gradcheck.hpp"
#include "icm/model.hpp"
#include "icm/rng.hpp"

using namespace icm;
using num::RngStream;

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
}  // namespace

TEST_CASE("standard normal prior: mode value, gradient, symmetry") {
  const int k = 4;
  Vector z = Vector::Zero(k);
  CHECK(model::log_prior_z(z) == doctest::Approx(-0.5 * k * kLog2Pi).epsilon(1e-14));

  RngStream rng(1);
  for (int i = 0; i < k; ++i) z(i) = rng.normal();
  CHECK(model::log_prior_z(z) == doctest::Approx(model::log_prior_z(-z)).epsilon(1e-14));
  CHECK(model::log_prior_w(z) == doctest::Approx(model::log_prior_z(z)).epsilon(1e-14));

  // The gradient of the log prior is exactly -z: finite differences agree.
  const num::LossFn loss = [](const Vector& v) {
    num::ValueGrad vg;
    vg.value = model::log_prior_z(v);
    vg.grad = -v;
    return vg;
  };
  CHECK(num::gradient_check(loss, z) <= 1e-7);
}

TEST_CASE("snp logits, factor-analysis variant") {
  model::IcmConfig config;
  config.latent_dim = 4;
  model::SnpModelParams params;
  params.kind = model::SnpModelKind::kLogisticFa;

  Matrix z(1, 4), w(2, 4);
  z << 1.0, 0.0, -2.0, 0.5;
  w.row(0) << 0.0, 3.0, 0.0, 0.0;   // orthogonal to z
  w.row(1) << 2.0, 0.0, 0.0, 0.0;   // dot product 2
  const Matrix logits = model::snp_logits(z, w, config, params);
  REQUIRE(logits.rows() == 1);
  REQUIRE(logits.cols() == 2);
  CHECK(logits(0, 0) == 0.0);
  CHECK(sigmoid(logits(0, 0)) == doctest::Approx(0.5));
  CHECK(logits(0, 1) == doctest::Approx(2.0));
  CHECK(sigmoid(logits(0, 1)) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
}

TEST_CASE("snp logits, neural variant: zeroed output layer is constant") {
  model::IcmConfig config;
  config.latent_dim = 3;
  config.snp_model = model::SnpModelKind::kNeural;
  RngStream rng(7);
  model::SnpModelParams params = model::init_snp_params(config, rng);
  params.net.w3.setZero();
  params.net.b3.setConstant(0.7);

  Matrix z(2, 3), w(3, 3);
  for (int i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  const Matrix logits = model::snp_logits(z, w, config, params);
  REQUIRE(logits.rows() == 2);
  REQUIRE(logits.cols() == 3);
  for (int i = 0; i < logits.size(); ++i)
    CHECK(logits.data()[i] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("snp log pmf: values, boundary, gradient, domain") {
  CHECK(model::snp_log_prob(1, 0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
  // Large logit drives pi toward 1: log pmf at x=2 approaches 0.
  CHECK(model::snp_log_prob(2, 30.0) > -1e-12);
  CHECK(model::snp_log_prob(2, 30.0) <= 0.0);
  // Gradient at (x=0, logit=0) is x - 2*sigmoid(0) = -1.
  CHECK(model::snp_log_prob_grad(0, 0.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS((void)model::snp_log_prob(3, 0.0), DomainError);
  CHECK_THROWS_AS((void)model::snp_log_prob(-1, 0.0), DomainError);

  // Finite differences on the logit at several points and genotypes.
  RngStream rng(3);
  for (const int x : {0, 1, 2}) {
    const num::LossFn loss = [x](const Vector& v) {
      num::ValueGrad vg;
      vg.value = model::snp_log_prob(x, v(0));
      vg.grad.resize(1);
      vg.grad(0) = model::snp_log_prob_grad(x, v(0));
      return vg;
    };
    for (int rep = 0; rep < 5; ++rep) {
      Vector at(1);
      at(0) = rng.normal(0.0, 2.0);
      CHECK(num::gradient_check(loss, at) <= 1e-6);
    }
  }
}

TEST_CASE("snp log pmf: exponentiates to a valid distribution") {
  for (const double logit : {-30.0, -3.0, -1.0, 0.0, 0.7, 4.0, 30.0}) {
    double total = 0.0;
    for (const int x : {0, 1, 2}) total += std::exp(model::snp_log_prob(x, logit));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("snp sampling and pmf are self-consistent") {
  // Draw from Binomial(2, sigmoid(logit)) via two Bernoulli trials and
  // compare empirical frequencies to the exponentiated log pmf.
  const double logit = 0.8;
  const double pi = sigmoid(logit);
  RngStream rng(42);
  const int n = 100000;
  long counts[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const int x = (rng.uniform() < pi ? 1 : 0) + (rng.uniform() < pi ? 1 : 0);
    counts[x]++;
  }
  double chi2 = 0.0;
  for (const int x : {0, 1, 2}) {
    const double expect = n * std::exp(model::snp_log_prob(x, logit));
    const double diff = counts[x] - expect;
    chi2 += diff * diff / expect;
  }
  CHECK(chi2 < 9.21034);  // 2 dof, alpha = 0.01
}

TEST_CASE("categorical pmf: normalization, spot values, gradient") {
  for (const int levels : {2, 3, 5, 9}) {
    for (const double loc : {-5.0, -1.2, 0.0, 0.3, 4.8}) {
      double total = 0.0;
      for (int level = 0; level < levels; ++level)
        total += std::exp(model::categorical_log_pmf(level, loc, levels));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // Two levels split at zero: pmf(0 | location 0) = 1/2.
  CHECK(model::categorical_log_pmf(0, 0.0, 2) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
  // Discretize agrees with the pmf's threshold layout.
  CHECK(model::categorical_discretize(-0.01, 2) == 0);
  CHECK(model::categorical_discretize(0.01, 2) == 1);
  CHECK(model::categorical_discretize(-10.0, 5) == 0);
  CHECK(model::categorical_discretize(10.0, 5) == 4);

  // Gradient against finite differences at representative pairs drawn the
  // way real data is generated (level near the location, so no bin sits
  // below double-precision mass).
  RngStream rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const int levels = 3 + static_cast<int>(rng.uniform_index(4));
    const double loc = rng.normal(0.0, 1.5);
    const int level = model::categorical_discretize(loc + 0.8 * rng.normal(), levels);
    const num::LossFn loss = [level, levels](const Vector& v) {
      num::ValueGrad vg;
      vg.value = model::categorical_log_pmf(level, v(0), levels);
      vg.grad.resize(1);
      vg.grad(0) = model::categorical_log_pmf_grad(level, v(0), levels);
      return vg;
    };
    Vector at(1);
    at(0) = loc;
    CHECK(num::gradient_check(loss, at) <= 1e-5);
  }
}

TEST_CASE("trait forward: linear projection and location-shift identity") {
  model::IcmConfig config;
  config.latent_dim = 2;
  config.trait_model = model::TraitModelKind::kLinear;
  const int snps = 5;
  model::TraitModelParams params;
  params.kind = model::TraitModelKind::kLinear;
  params.snps = snps;
  params.latent_dim = 2;
  params.coef = Vector::Zero(snps + 2);
  params.coef(0) = 1.0;  // first SNP only

  Vector x(snps);
  x << 2.0, 1.0, 0.0, 2.0, 1.0;
  Vector z(2);
  z << 0.3, -0.4;
  const auto noiseless = model::trait_forward(x, z, 0.0, config, params);
  CHECK(noiseless.y == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(noiseless.hidden1.size() == 0);  // linear model exposes no hidden layer

  // Location shift: the injected noise appears additively, exactly.
  const auto shifted = model::trait_forward(x, z, 0.37, config, params);
  CHECK(shifted.y - noiseless.y == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("trait forward: neural with zeroed final layer is the bias") {
  model::IcmConfig config;
  config.latent_dim = 2;
  config.trait_model = model::TraitModelKind::kNeural;
  config.trait_hidden1 = 8;
  config.trait_hidden2 = 6;
  const int snps = 4;
  RngStream rng(11);
  model::TraitModelParams params = model::init_trait_params(config, snps, rng);
  params.net.w3.setZero();
  params.net.b3.setConstant(-1.25);

  Vector x(snps);
  x << 1.0, 0.0, 2.0, 1.0;
  Vector z(2);
  z << 0.5, 0.5;
  const auto out = model::trait_forward(x, z, 0.0, config, params);
  CHECK(out.y == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(out.hidden1.size() == 8);
}

TEST_CASE("group lasso prior: zero groups, arithmetic, gradient") {
  model::IcmConfig config;
  config.latent_dim = 2;
  config.trait_model = model::TraitModelKind::kNeural;
  config.trait_hidden1 = 4;  // group size 4 per SNP column
  config.trait_hidden2 = 3;
  const int snps = 3;
  RngStream rng(21);

  // All SNP groups zero: the value must not depend on the scale at all.
  model::TraitModelParams zeroed = model::init_trait_params(config, snps, rng);
  const num::MlpSpec spec = config.trait_net_spec(snps);
  // SNP columns sit after the z prefix in the first-layer weights.
  for (int m = 0; m < snps; ++m) zeroed.net.w1.col(config.latent_dim + m).setZero();
  const double v1 = model::group_lasso_log_prior(config, zeroed, 1.0, nullptr);
  const double v5 = model::group_lasso_log_prior(config, zeroed, 5.0, nullptr);
  CHECK(v1 == doctest::Approx(v5).epsilon(1e-14));

  // One group with norm 2, scale 1, group size 4: the penalty term is
  // -1 * sqrt(4) * 2 = -4, isolated as a difference of log priors.
  model::TraitModelParams one = zeroed;
  one.net.w1.col(config.latent_dim + 1).setConstant(1.0);  // norm sqrt(4) = 2
  const double with_group = model::group_lasso_log_prior(config, one, 1.0, nullptr);
  CHECK(with_group - v1 == doctest::Approx(-4.0).epsilon(1e-12));

  // Gradient on a random nonzero configuration vs finite differences.
  model::TraitModelParams dense = model::init_trait_params(config, snps, rng);
  const num::LossFn loss = [&](const Vector& flat) {
    model::TraitModelParams local = dense;
    num::unflatten(spec, flat, local.net);
    model::TraitModelParams grad = local;
    num::ValueGrad vg;
    vg.value = model::group_lasso_log_prior(config, local, 1.3, &grad);
    vg.grad = num::flatten_grads(spec, grad.net);
    return vg;
  };
  CHECK(num::gradient_check(loss, num::flatten(spec, dense.net)) <= 1e-5);

  // Subgradient at an exactly-zero group is zero for that group.
  model::TraitModelParams grad = zeroed;
  (void)model::group_lasso_log_prior(config, zeroed, 1.0, &grad);
  for (int m = 0; m < snps; ++m)
    CHECK(grad.net.w1.col(config.latent_dim + m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("group lasso prior: linear model uses coefficient groups") {
  model::IcmConfig config;
  config.latent_dim = 2;
  config.trait_model = model::TraitModelKind::kLinear;
  const int snps = 4;
  model::TraitModelParams params;
  params.kind = model::TraitModelKind::kLinear;
  params.snps = snps;
  params.latent_dim = 2;
  params.coef = Vector::Zero(snps + 2);
  const double base = model::group_lasso_log_prior(config, params, 1.0, nullptr);
  params.coef(1) = 2.0;  // one singleton group with norm 2
  const double with_one = model::group_lasso_log_prior(config, params, 1.0, nullptr);
  CHECK(with_one - base == doctest::Approx(-2.0).epsilon(1e-12));

  // Gradient against finite differences over the coefficient vector.
  RngStream rng(31);
  for (int i = 0; i < params.coef.size(); ++i) params.coef(i) = rng.normal();
  const num::LossFn loss = [&](const Vector& flat) {
    model::TraitModelParams local = params;
    local.coef = flat;
    model::TraitModelParams grad = local;
    num::ValueGrad vg;
    vg.value = model::group_lasso_log_prior(config, local, 0.9, &grad);
    vg.grad = grad.coef;
    return vg;
  };
  CHECK(num::gradient_check(loss, params.coef) <= 1e-5);
}

TEST_CASE("config validation rejects out-of-domain values") {
  model::IcmConfig config;
  config.latent_dim = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.latent_dim = 3;
  config.group_lasso_scale = 0.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.group_lasso_scale = 1.0;
  config.trait_kind = model::TraitKind::kCategorical;
  config.categorical_levels = 1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.categorical_levels = 5;
  CHECK_NOTHROW(config.validate());
  // The implicit trait kind requires the neural trait model.
  config.trait_kind = model::TraitKind::kRealImplicit;
  config.trait_model = model::TraitModelKind::kLinear;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.trait_model = model::TraitModelKind::kNeural;
  CHECK_NOTHROW(config.validate());
  config.trait_kind = model::TraitKind::kRealLocationShift;
  config.trait_model = model::TraitModelKind::kLinear;

  // Network shapes follow the configuration.
  const num::MlpSpec snp = config.snp_net_spec();
  CHECK(snp.input_dim == 2 * config.latent_dim);
  CHECK(snp.output_dim == 1);
  const num::MlpSpec trait = config.trait_net_spec(100);
  CHECK(trait.input_dim == config.latent_dim + 100 + 1);
  CHECK(trait.skip_prefix == config.latent_dim);
}

TEST_CASE("model kind names round-trip") {
  CHECK(model::snp_model_from_name(model::snp_model_name(model::SnpModelKind::kNeural)) ==
        model::SnpModelKind::kNeural);
  CHECK(model::trait_kind_from_name(model::trait_kind_name(
            model::TraitKind::kRealImplicit)) == model::TraitKind::kRealImplicit);
  CHECK_THROWS_AS((void)model::snp_model_from_name("bogus"), DomainError);
}
