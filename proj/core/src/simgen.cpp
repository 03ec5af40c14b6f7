#include "icm/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "icm/errors.hpp"
#include "icm/kmeans.hpp"
#include "icm/parallel.hpp"

namespace icm {

GenotypeMatrix::GenotypeMatrix(int individuals, int snps)
    : individuals_(individuals), snps_(snps) {
  if (individuals <= 0 || snps <= 0)
    throw DimensionError("GenotypeMatrix: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(individuals) * static_cast<std::size_t>(snps), 0);
}

Vector GenotypeMatrix::snp_column(int m) const {
  if (m < 0 || m >= snps_) throw DimensionError("snp_column: index out of range");
  Vector col(individuals_);
  for (int n = 0; n < individuals_; ++n) col(n) = static_cast<double>((*this)(n, m));
  return col;
}

Matrix GenotypeMatrix::columns(std::span<const int> snp_indices) const {
  Matrix out(individuals_, static_cast<Eigen::Index>(snp_indices.size()));
  for (std::size_t j = 0; j < snp_indices.size(); ++j) {
    const int m = snp_indices[j];
    if (m < 0 || m >= snps_) throw DimensionError("columns: index out of range");
    for (int n = 0; n < individuals_; ++n)
      out(n, static_cast<Eigen::Index>(j)) = static_cast<double>((*this)(n, m));
  }
  return out;
}

double GenotypeMatrix::mean() const {
  if (data_.empty()) return 0.0;
  double total = 0.0;
  for (const std::uint8_t v : data_) total += static_cast<double>(v);
  return total / static_cast<double>(data_.size());
}

}  // namespace icm

namespace icm::simgen {

namespace {

// Child-stream keys for the independent pieces of a dataset draw.
constexpr std::uint64_t kKeyStructure = 1;
constexpr std::uint64_t kKeyGenotypes = 2;
constexpr std::uint64_t kKeyTraits = 3;
constexpr std::uint64_t kKeyBeta = 11;
constexpr std::uint64_t kKeyClusters = 12;
constexpr std::uint64_t kKeyNoiseVar = 13;
constexpr std::uint64_t kKeyNoise = 14;

constexpr int kPopulations = 3;
constexpr int kClusterCount = 3;
constexpr int kKmeansRestarts = 10;

// Balding-Nichols loading: allele frequency around ancestral p with
// divergence f, as Beta(p(1-f)/f, (1-p)(1-f)/f).
double balding_nichols(double p, double f, num::RngStream& rng) {
  const double ratio = (1.0 - f) / f;
  return rng.beta(p * ratio, (1.0 - p) * ratio);
}

Matrix bn_loadings(int snps, num::RngStream& rng) {
  Matrix gamma(snps, kPopulations);
  for (int m = 0; m < snps; ++m) {
    num::RngStream row = rng.split(static_cast<std::uint64_t>(m));
    const double p = row.uniform(0.1, 0.9);
    const double f = row.uniform(0.01, 0.2);
    for (int k = 0; k < kPopulations; ++k) gamma(m, k) = balding_nichols(p, f, row);
  }
  return gamma;
}

// Spatial-style loadings: two weak uniform rows plus a strong baseline.
Matrix spatial_loadings(int snps, num::RngStream& rng) {
  Matrix gamma(snps, kPopulations);
  for (int m = 0; m < snps; ++m) {
    num::RngStream row = rng.split(static_cast<std::uint64_t>(m));
    gamma(m, 0) = 0.9 * row.uniform(0.0, 0.5);
    gamma(m, 1) = 0.9 * row.uniform(0.0, 0.5);
    gamma(m, 2) = 0.05;
  }
  return gamma;
}

// Ascending index ordering for axis one, a tent (up-then-down) ordering for
// axis two, so the two smooth gradients are not collinear.
int tent_position(int i, int n) {
  return i % 2 == 0 ? i / 2 : n - 1 - i / 2;
}

Vector smooth_axis(int n, bool tent, num::RngStream& rng) {
  std::vector<double> draws(static_cast<std::size_t>(n));
  for (auto& d : draws) d = rng.uniform();
  std::sort(draws.begin(), draws.end());
  const double lo = draws.front();
  const double hi = draws.back();
  const double span = hi > lo ? hi - lo : 1.0;
  Vector axis(n);
  for (int i = 0; i < n; ++i) {
    const int pos = tent ? tent_position(i, n) : i;
    axis(i) = (draws[static_cast<std::size_t>(pos)] - lo) / span;
  }
  return axis;
}

}  // namespace

std::string family_name(StructureFamily family) {
  switch (family) {
    case StructureFamily::kBnSurrogate: return "bn_surrogate";
    case StructureFamily::kPsd: return "psd";
    case StructureFamily::kSpatial: return "spatial";
    case StructureFamily::kPcSurrogate: return "pc_surrogate";
  }
  throw DomainError("family_name: unknown family");
}

StructureFamily family_from_name(const std::string& name) {
  std::string lower(name.size(), '\0');
  std::transform(name.begin(), name.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "bn_surrogate") return StructureFamily::kBnSurrogate;
  if (lower == "psd") return StructureFamily::kPsd;
  if (lower == "spatial") return StructureFamily::kSpatial;
  if (lower == "pc_surrogate") return StructureFamily::kPcSurrogate;
  throw DomainError("family_from_name: unknown family '" + name + "'");
}

StructureMatrices make_structure(StructureFamily family, double a, int snps,
                                 int individuals, int k_pop, num::RngStream& rng) {
  if (snps <= 0 || individuals <= 0)
    throw DimensionError("make_structure: dimensions must be positive");
  if (k_pop != kPopulations)
    throw DomainError("make_structure: every family is built over 3 populations");
  const bool needs_a =
      family == StructureFamily::kPsd || family == StructureFamily::kSpatial;
  if (needs_a && !(a > 0.0)) throw DomainError("make_structure: a must be positive");

  StructureMatrices out;
  out.family = family;
  out.sparsity = needs_a ? a : 1.0;
  num::RngStream gamma_rng = rng.split(1);
  num::RngStream s_rng = rng.split(2);

  switch (family) {
    case StructureFamily::kBnSurrogate: {
      out.gamma = bn_loadings(snps, gamma_rng);
      // Discrete membership with 60/210, 60/210, 90/210 mixing.
      out.s = Matrix::Zero(kPopulations, individuals);
      for (int n = 0; n < individuals; ++n) {
        const double u = s_rng.uniform();
        const int pop = u < 60.0 / 210.0 ? 0 : (u < 120.0 / 210.0 ? 1 : 2);
        out.s(pop, n) = 1.0;
      }
      break;
    }
    case StructureFamily::kPsd: {
      out.gamma = bn_loadings(snps, gamma_rng);
      out.s.resize(kPopulations, individuals);
      const std::vector<double> alpha(kPopulations, a);
      for (int n = 0; n < individuals; ++n) {
        const std::vector<double> mix = s_rng.dirichlet(alpha);
        for (int k = 0; k < kPopulations; ++k) out.s(k, n) = mix[static_cast<std::size_t>(k)];
      }
      break;
    }
    case StructureFamily::kSpatial: {
      out.gamma = spatial_loadings(snps, gamma_rng);
      out.s.resize(kPopulations, individuals);
      for (int n = 0; n < individuals; ++n) {
        out.s(0, n) = s_rng.beta(a, a);
        out.s(1, n) = s_rng.beta(a, a);
        out.s(2, n) = 1.0;
      }
      break;
    }
    case StructureFamily::kPcSurrogate: {
      out.gamma = spatial_loadings(snps, gamma_rng);
      out.s.resize(kPopulations, individuals);
      out.s.row(0) = smooth_axis(individuals, false, s_rng).transpose();
      out.s.row(1) = smooth_axis(individuals, true, s_rng).transpose();
      out.s.row(2).setOnes();
      break;
    }
  }
  return out;
}

GenotypeMatrix simulate_genotypes(const StructureMatrices& structure,
                                  num::RngStream& rng, int threads) {
  const auto snps = static_cast<int>(structure.gamma.rows());
  const auto individuals = static_cast<int>(structure.s.cols());
  if (structure.gamma.cols() != structure.s.rows())
    throw DimensionError("simulate_genotypes: gamma and s are incompatible");

  GenotypeMatrix x(individuals, snps);
  num::parallel_for(snps, threads, [&](int m) {
    num::RngStream col = rng.split(static_cast<std::uint64_t>(m));
    const Eigen::RowVectorXd freq = structure.gamma.row(m) * structure.s;
    for (int n = 0; n < individuals; ++n) {
      const double pi = std::clamp(freq(n), kFreqClamp, 1.0 - kFreqClamp);
      // Two allele draws; each succeeds when its uniform falls below pi.
      const int allele1 = col.uniform() < pi ? 1 : 0;
      const int allele2 = col.uniform() < pi ? 1 : 0;
      x(n, m) = static_cast<std::uint8_t>(allele1 + allele2);
    }
  });
  return x;
}

TraitData simulate_traits(const GenotypeMatrix& genotypes, const Matrix& s,
                          int n_causal, num::RngStream& rng) {
  const int individuals = genotypes.individuals();
  const int snps = genotypes.snps();
  if (s.cols() != individuals)
    throw DimensionError("simulate_traits: membership matrix does not match genotypes");
  if (n_causal < 0 || n_causal > snps)
    throw DomainError("simulate_traits: n_causal out of range");

  TraitData out;
  out.beta = Vector::Zero(snps);
  num::RngStream beta_rng = rng.split(kKeyBeta);
  // Effect variance 0.5; the causal set is the first n_causal SNPs.
  for (int m = 0; m < n_causal; ++m) {
    out.beta(m) = beta_rng.normal(0.0, std::sqrt(0.5));
    out.causal.push_back(m);
  }

  num::RngStream cluster_rng = rng.split(kKeyClusters);
  const num::KmeansResult clusters =
      num::kmeans(s.transpose(), kClusterCount, cluster_rng, kKmeansRestarts);

  num::RngStream var_rng = rng.split(kKeyNoiseVar);
  Vector tau(kClusterCount);
  for (int k = 0; k < kClusterCount; ++k)
    tau(k) = std::sqrt(var_rng.inverse_gamma(3.0, 1.0));

  out.lambda.resize(individuals);
  out.sigma.resize(individuals);
  out.traits.resize(individuals);
  num::RngStream noise_rng = rng.split(kKeyNoise);
  for (int n = 0; n < individuals; ++n) {
    const int k = clusters.labels[static_cast<std::size_t>(n)];
    out.lambda(n) = static_cast<double>(k + 1);
    out.sigma(n) = tau(k);
    double effect = 0.0;
    for (int m = 0; m < n_causal; ++m)
      effect += out.beta(m) * static_cast<double>(genotypes(n, m));
    out.traits(n) = effect + out.lambda(n) + out.sigma(n) * noise_rng.normal();
  }
  return out;
}

SimulatedDataset simulate_dataset(StructureFamily family, double a, int snps,
                                  int individuals, int n_causal, std::uint64_t seed,
                                  int threads) {
  num::RngStream root(seed);
  SimulatedDataset ds;
  ds.seed = seed;
  num::RngStream structure_rng = root.split(kKeyStructure);
  ds.structure = make_structure(family, a, snps, individuals, kPopulations, structure_rng);
  num::RngStream geno_rng = root.split(kKeyGenotypes);
  ds.genotypes = simulate_genotypes(ds.structure, geno_rng, threads);
  num::RngStream trait_rng = root.split(kKeyTraits);
  ds.trait = simulate_traits(ds.genotypes, ds.structure.s, n_causal, trait_rng);
  return ds;
}

}  // namespace icm::simgen
