#include "icm/rng.hpp"

#include <cmath>
#include <numbers>

#include "icm/errors.hpp"

namespace icm::num {

namespace {

constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kSplitSalt = 0xD1B54A32D192ED03ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed)
    : seed_(seed), base_(mix64(seed ^ kSplitSalt)), position_(0) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t position) : RngStream(seed) {
  position_ = position;
}

RngStream RngStream::split(std::uint64_t key) const {
  // Child identity is a fresh 64-bit seed hashed from (base, key); the
  // child starts at position 0 and never touches the parent's counter.
  return RngStream(mix64(base_ + kWeyl * (key + 1)));
}

std::uint64_t RngStream::next_u64() {
  ++position_;
  return mix64(base_ + kWeyl * position_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo < hi)) throw DomainError("uniform: lo must be < hi");
  return lo + (hi - lo) * uniform();
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw DomainError("uniform_index: n must be positive");
  // Rejection keeps the distribution exactly uniform.
  const std::uint64_t limit = n * (~0ull / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double RngStream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double sd) {
  if (!(sd >= 0.0)) throw DomainError("normal: sd must be nonnegative");
  return mean + sd * normal();
}

double RngStream::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw DomainError("gamma: shape and scale must be positive");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double g = gamma(shape + 1.0, 1.0);
    const double u = 1.0 - uniform();
    return scale * g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = 1.0 - uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return scale * d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

double RngStream::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta: a and b must be positive");
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

double RngStream::inverse_gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw DomainError("inverse_gamma: shape and scale must be positive");
  return 1.0 / gamma(shape, 1.0 / scale);
}

std::vector<double> RngStream::dirichlet(std::span<const double> alpha) {
  if (alpha.size() < 2) throw DomainError("dirichlet: need at least two concentrations");
  std::vector<double> g(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    g[i] = gamma(alpha[i], 1.0);
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

std::vector<int> RngStream::permutation(int n) {
  if (n < 0) throw DomainError("permutation: n must be nonnegative");
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

double sample(const UniformDist& d, RngStream& rng) { return rng.uniform(d.lo, d.hi); }
double sample(const NormalDist& d, RngStream& rng) { return rng.normal(d.mean, d.sd); }
double sample(const BetaDist& d, RngStream& rng) { return rng.beta(d.a, d.b); }
double sample(const InverseGammaDist& d, RngStream& rng) {
  return rng.inverse_gamma(d.shape, d.scale);
}
std::vector<double> sample(const DirichletDist& d, RngStream& rng) {
  return rng.dirichlet(d.alpha);
}

}  // namespace icm::num
