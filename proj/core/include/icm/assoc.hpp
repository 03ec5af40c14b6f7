#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icm/genotype.hpp"
#include "icm/la.hpp"
#include "icm/model.hpp"

namespace icm::assoc {

// Per-SNP association scan output.  p_value and statistic have one entry per
// SNP; degenerate marks SNPs whose test could not be formed (constant column
// or a SNP column linearly dependent on the covariates) — those carry
// statistic 0 and p-value 1.
struct AssociationResult {
  std::string method;
  double threshold = 0.0025;
  Vector statistic;
  Vector p_value;
  std::vector<char> degenerate;
  double lambda_gc = 1.0;

  int snps() const { return static_cast<int>(p_value.size()); }
  // {m : p_value_m <= threshold}, ascending.
  std::vector<int> significant_set() const;
};

// OLS of y on [1, x_m, covariates] per SNP with a two-sided t-test on the
// x_m coefficient.  `covariates` may have zero columns.
AssociationResult test_with_covariates(const GenotypeMatrix& x, const Vector& y,
                                       const Matrix& covariates,
                                       const std::string& method, double threshold,
                                       int threads = 1);

// Primary corrected test: covariates are the stage-1 posterior-mean
// confounders (one row per individual).
AssociationResult test_corrected(const GenotypeMatrix& x, const Vector& y,
                                 const Matrix& z_hat, double threshold = 0.0025,
                                 int threads = 1);

// Baseline: covariates are the top-k principal-component scores of the
// genotype matrix.  k = 0 reduces to the uncorrected test.
AssociationResult test_pca_baseline(const GenotypeMatrix& x, const Vector& y,
                                    int components, double threshold = 0.0025,
                                    int threads = 1);

AssociationResult test_uncorrected(const GenotypeMatrix& x, const Vector& y,
                                   double threshold = 0.0025, int threads = 1);

// Model-based SNP relevance: the first-layer group norm per SNP for a neural
// trait model, |coefficient| for a linear one.  A ranking, not a p-value.
Vector nn_snp_scores(const model::IcmConfig& config,
                     const model::TraitModelParams& theta);

// |significant ∩ causal| / |significant|; empty significant set -> nullopt.
std::optional<double> precision(const AssociationResult& result,
                                const std::vector<int>& causal_set);

// Expected false positives for a calibrated test: null_snps * threshold.
double expected_false_positives(int null_snps, double threshold);

// Genomic control: lambda = median of the chi-square(1) quantiles of the
// p-values divided by the theoretical null median.  When lambda > 1 the
// returned copy carries p-values recomputed from statistic^2 / lambda on the
// chi-square(1) scale; lambda <= 1 leaves the result unchanged.  Requires at
// least 100 p-values.
std::pair<double, AssociationResult> genomic_control(const AssociationResult& result);

}  // namespace icm::assoc
