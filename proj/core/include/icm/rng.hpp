#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace icm::num {

// Counter-based pseudo-random stream.  The full state is (seed, position),
// so a stream can be serialized and restored in O(1) and replays
// bit-exactly.  Child streams are derived by hashing (state, key); work
// that is keyed per row, per SNP, or per replicate therefore draws the
// same values no matter how it is scheduled across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(std::uint64_t seed, std::uint64_t position);

  // Deterministic child stream for subtask `key`; the parent is unchanged.
  RngStream split(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();
  double normal(double mean, double sd);

  // Marsaglia-Tsang squeeze for shape >= 1, boosted for shape < 1.
  double gamma(double shape, double scale);
  double beta(double a, double b);
  // 1/Gamma(shape, 1/scale): mean scale/(shape-1) for shape > 1.
  double inverse_gamma(double shape, double scale);
  std::vector<double> dirichlet(std::span<const double> alpha);

  // Fisher-Yates shuffle of [0, n) index vector.
  std::vector<int> permutation(int n);

 private:
  std::uint64_t seed_;
  std::uint64_t base_;
  std::uint64_t position_;
};

// Distribution descriptors so simulation configs can carry a distribution
// as data and sample it against any stream.
struct UniformDist {
  double lo = 0.0;
  double hi = 1.0;
};
struct NormalDist {
  double mean = 0.0;
  double sd = 1.0;
};
struct BetaDist {
  double a = 1.0;
  double b = 1.0;
};
struct InverseGammaDist {
  double shape = 1.0;
  double scale = 1.0;
};
struct DirichletDist {
  std::vector<double> alpha;
};

double sample(const UniformDist& d, RngStream& rng);
double sample(const NormalDist& d, RngStream& rng);
double sample(const BetaDist& d, RngStream& rng);
double sample(const InverseGammaDist& d, RngStream& rng);
std::vector<double> sample(const DirichletDist& d, RngStream& rng);

}  // namespace icm::num
