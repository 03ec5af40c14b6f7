#include "icm/assoc.hpp"

#include <algorithm>
#include <cmath>

#include "icm/errors.hpp"
#include "icm/ols.hpp"
#include "icm/parallel.hpp"
#include "icm/pca.hpp"
#include "icm/specfun.hpp"

namespace icm::assoc {

namespace {

Matrix geno_dense(const GenotypeMatrix& x) {
  Matrix out(x.individuals(), x.snps());
  for (int n = 0; n < x.individuals(); ++n)
    for (int m = 0; m < x.snps(); ++m) out(n, m) = static_cast<double>(x(n, m));
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<int> AssociationResult::significant_set() const {
  std::vector<int> out;
  for (int m = 0; m < snps(); ++m)
    if (p_value(m) <= threshold) out.push_back(m);
  return out;
}

AssociationResult test_with_covariates(const GenotypeMatrix& x, const Vector& y,
                                       const Matrix& covariates,
                                       const std::string& method, double threshold,
                                       int threads) {
  const int n = x.individuals();
  const int m_total = x.snps();
  if (y.size() != n) throw DimensionError("association scan: trait length mismatch");
  if (covariates.size() != 0 && covariates.rows() != n)
    throw DimensionError("association scan: covariate row count mismatch");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw DomainError("association scan: threshold must lie in (0, 1)");
  const auto c = covariates.size() == 0 ? Eigen::Index{0} : covariates.cols();
  if (n < c + 3)
    throw DimensionError("association scan: need more individuals than regressors");

  AssociationResult res;
  res.method = method;
  res.threshold = threshold;
  res.statistic = Vector::Zero(m_total);
  res.p_value = Vector::Ones(m_total);
  res.degenerate.assign(static_cast<std::size_t>(m_total), 0);

  if (y.maxCoeff() == y.minCoeff()) {
    // Zero-variance trait: every per-SNP test is degenerate.  Residuals are
    // identically zero only up to roundoff, so the t ratio would be noise.
    res.degenerate.assign(static_cast<std::size_t>(m_total), 1);
    return res;
  }

  num::parallel_for(m_total, threads, [&](int m) {
    const Vector snp = x.snp_column(m);
    if (snp.maxCoeff() == snp.minCoeff()) {
      res.degenerate[static_cast<std::size_t>(m)] = 1;
      return;  // constant SNP: statistic 0, p-value 1
    }
    Matrix design(n, 2 + c);
    design.col(0).setOnes();
    design.col(1) = snp;
    if (c > 0) design.rightCols(c) = covariates;
    try {
      const num::OlsResult fit = num::ols_ttest(y, design);
      res.statistic(m) = fit.t_stat(1);
      res.p_value(m) = fit.p_value(1);
    } catch (const SingularityError& e) {
      if (e.column() != 1) throw;  // covariate-side singularity is a caller error
      res.degenerate[static_cast<std::size_t>(m)] = 1;
    }
  });
  return res;
}

AssociationResult test_corrected(const GenotypeMatrix& x, const Vector& y,
                                 const Matrix& z_hat, double threshold, int threads) {
  return test_with_covariates(x, y, z_hat, "icm", threshold, threads);
}

AssociationResult test_pca_baseline(const GenotypeMatrix& x, const Vector& y,
                                    int components, double threshold, int threads) {
  if (components < 0) throw DomainError("test_pca_baseline: components must be >= 0");
  if (components > std::min(x.individuals(), x.snps()))
    throw DimensionError("test_pca_baseline: components exceed min(N, M)");
  if (components == 0)
    return test_with_covariates(x, y, Matrix(), "pca", threshold, threads);
  const num::PcaResult pca = num::top_principal_components(geno_dense(x), components);
  return test_with_covariates(x, y, pca.scores, "pca", threshold, threads);
}

AssociationResult test_uncorrected(const GenotypeMatrix& x, const Vector& y,
                                   double threshold, int threads) {
  return test_with_covariates(x, y, Matrix(), "uncorrected", threshold, threads);
}

Vector nn_snp_scores(const model::IcmConfig& config,
                     const model::TraitModelParams& theta) {
  Vector scores(theta.snps);
  if (theta.kind == model::TraitModelKind::kLinear) {
    if (theta.coef.size() != theta.snps + theta.latent_dim)
      throw DimensionError("nn_snp_scores: coefficient length mismatch");
    scores = theta.coef.head(theta.snps).cwiseAbs();
    return scores;
  }
  const num::MlpSpec spec = config.trait_net_spec(theta.snps);
  if (theta.net.w1.rows() != spec.hidden1 || theta.net.w1.cols() != spec.input_dim)
    throw DimensionError("nn_snp_scores: first-layer shape mismatch");
  for (int m = 0; m < theta.snps; ++m)
    scores(m) = theta.net.w1.col(theta.latent_dim + m).norm();
  return scores;
}

std::optional<double> precision(const AssociationResult& result,
                                const std::vector<int>& causal_set) {
  const std::vector<int> sig = result.significant_set();
  if (sig.empty()) return std::nullopt;
  std::vector<int> causal = causal_set;
  std::sort(causal.begin(), causal.end());
  int true_pos = 0;
  for (const int m : sig)
    if (std::binary_search(causal.begin(), causal.end(), m)) ++true_pos;
  return static_cast<double>(true_pos) / static_cast<double>(sig.size());
}

double expected_false_positives(int null_snps, double threshold) {
  if (null_snps < 0) throw DomainError("expected_false_positives: negative SNP count");
  return static_cast<double>(null_snps) * threshold;
}

std::pair<double, AssociationResult> genomic_control(const AssociationResult& result) {
  if (result.snps() < 100)
    throw DomainError("genomic_control: needs at least 100 p-values");

  std::vector<double> chi2(static_cast<std::size_t>(result.snps()));
  for (int m = 0; m < result.snps(); ++m)
    chi2[static_cast<std::size_t>(m)] = num::chi2_1_from_pvalue(result.p_value(m));
  const double lambda = median_of(std::move(chi2)) / num::kChi2OneMedian;

  AssociationResult corrected = result;
  corrected.lambda_gc = lambda;
  if (lambda > 1.0) {
    for (int m = 0; m < result.snps(); ++m) {
      const double stat = result.statistic(m);
      corrected.p_value(m) = num::chi2_1_sf(stat * stat / lambda);
    }
  }
  return {lambda, std::move(corrected)};
}

}  // namespace icm::assoc
