#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icm/genotype.hpp"
#include "icm/la.hpp"
#include "icm/rng.hpp"

namespace icm::simgen {

// Population-structure scenarios for the synthetic studies.  Each family
// fixes how the SNP loadings gamma (snps by 3) and the membership matrix
// s (3 by individuals) are drawn; allele frequencies are gamma * s.
enum class StructureFamily {
  kBnSurrogate,  // three discrete subpopulations, Balding-Nichols loadings
  kPsd,          // Dirichlet(a, a, a) admixture proportions
  kSpatial,      // two continuous membership rows Beta(a, a) plus intercept
  kPcSurrogate,  // two smooth synthetic axes plus intercept
};

// Config-facing names: "bn_surrogate", "psd", "spatial", "pc_surrogate"
// (accepted case-insensitively).
std::string family_name(StructureFamily family);
StructureFamily family_from_name(const std::string& name);

struct StructureMatrices {
  StructureFamily family{};
  double sparsity = 1.0;  // the a parameter; ignored by the surrogate families
  Matrix gamma;           // snps by 3
  Matrix s;               // 3 by individuals
};

// Frequencies are clamped away from 0 and 1 before genotypes are drawn.
inline constexpr double kFreqClamp = 1e-4;

StructureMatrices make_structure(StructureFamily family, double a, int snps,
                                 int individuals, int k_pop, num::RngStream& rng);

// Each genotype is two Bernoulli allele draws against pi = gamma * s.
// Column m uses its own child stream, so per-SNP draws do not depend on
// scheduling.
GenotypeMatrix simulate_genotypes(const StructureMatrices& structure,
                                  num::RngStream& rng, int threads = 1);

struct TraitData {
  Vector traits;            // one per individual
  Vector beta;              // per-SNP effects; nonzero only on the causal set
  Vector lambda;            // per-individual confounder offset
  Vector sigma;             // per-individual noise scale
  std::vector<int> causal;  // indices of causal SNPs
};

// Trait = causal effects + cluster offset + heteroskedastic noise.  The
// offsets come from k-means (3 clusters) on the membership columns; each
// cluster k gets offset k+1 and noise variance drawn InverseGamma(3, 1).
TraitData simulate_traits(const GenotypeMatrix& genotypes, const Matrix& s,
                          int n_causal, num::RngStream& rng);

struct SimulatedDataset {
  StructureMatrices structure;
  GenotypeMatrix genotypes;
  TraitData trait;
  std::uint64_t seed = 0;
};

SimulatedDataset simulate_dataset(StructureFamily family, double a, int snps,
                                  int individuals, int n_causal, std::uint64_t seed,
                                  int threads = 1);

}  // namespace icm::simgen
