#include "ifr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ifr/common.hpp"
#include "ifr/numeric.hpp"

namespace ifr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double log_choose(std::int64_t n, std::int64_t k) {
  return num::lgamma(static_cast<double>(n) + 1) - num::lgamma(static_cast<double>(k) + 1) -
         num::lgamma(static_cast<double>(n - k) + 1);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  return splitmix64(seed ^ splitmix64(label));
}

std::uint64_t hash_label(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::int64_t sample_hypergeometric(Philox& rng, std::int64_t total, std::int64_t marked, std::int64_t draws) {
  if (marked < 0 || draws < 0 || marked > total || draws > total)
    throw ValidationError("hypergeometric: invalid parameters");
  const std::int64_t lo = std::max<std::int64_t>(0, draws - (total - marked));
  const std::int64_t hi = std::min(draws, marked);
  if (lo == hi) return lo;

  auto log_pmf = [&](std::int64_t x) {
    return log_choose(marked, x) + log_choose(total - marked, draws - x) - log_choose(total, draws);
  };
  // pmf(x+1)/pmf(x)
  auto up_ratio = [&](std::int64_t x) {
    return static_cast<double>(marked - x) * static_cast<double>(draws - x) /
           (static_cast<double>(x + 1) * static_cast<double>(total - marked - draws + x + 1));
  };

  auto mode = static_cast<std::int64_t>(
      std::floor((static_cast<double>(draws) + 1) * (static_cast<double>(marked) + 1) / (static_cast<double>(total) + 2)));
  mode = std::clamp(mode, lo, hi);

  double u = rng.uniform();
  const double p_mode = std::exp(log_pmf(mode));
  double p_dn = p_mode, p_up = p_mode;
  std::int64_t x_dn = mode, x_up = mode;
  u -= p_mode;
  if (u <= 0) return mode;
  // Alternate below / above the mode; the visiting order is fixed, so this is
  // an exact inversion of the pmf under a permuted ordering of the support.
  while (x_dn > lo || x_up < hi) {
    if (x_dn > lo) {
      p_dn /= up_ratio(x_dn - 1);
      --x_dn;
      u -= p_dn;
      if (u <= 0) return x_dn;
    }
    if (x_up < hi) {
      p_up *= up_ratio(x_up);
      ++x_up;
      u -= p_up;
      if (u <= 0) return x_up;
    }
  }
  return mode;  // rounding residue
}

std::int64_t sample_binomial(Philox& rng, std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(rng);
}

std::int64_t sample_poisson(Philox& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

double sample_normal(Philox& rng) { return num::normal_quantile(rng.uniform()); }

}  // namespace ifr
