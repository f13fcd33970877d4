#include "mmsi/lattice.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <utility>

namespace mmsi::lattice {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::int64_t next_prime(std::int64_t n) {
  auto is_prime = [](std::int64_t v) {
    if (v < 2) return false;
    if (v % 2 == 0) return v == 2;
    for (std::int64_t d = 3; d * d <= v; d += 2)
      if (v % d == 0) return false;
    return true;
  };
  while (!is_prime(n)) ++n;
  return n;
}

std::int64_t stage_size(int stage) { return next_prime(std::int64_t{64} << stage); }

double p2_merit(std::int64_t n, int dim, std::int64_t a) {
  constexpr double two_pi_sq = 2.0 * std::numbers::pi * std::numbers::pi;
  std::vector<std::int64_t> z(dim);
  std::int64_t g = 1;
  for (int j = 0; j < dim; ++j) {
    z[j] = g;
    g = (g * a) % n;
  }
  double total = 0.0;
  for (std::int64_t k = 0; k < n; ++k) {
    double prod = 1.0;
    for (int j = 0; j < dim; ++j) {
      const double x = static_cast<double>((k * z[j]) % n) / static_cast<double>(n);
      prod *= 1.0 + two_pi_sq * (x * x - x + 1.0 / 6.0);
    }
    total += prod;
  }
  return total / static_cast<double>(n) - 1.0;
}

namespace {

KorobovRule build_rule(std::int64_t n, int dim) {
  KorobovRule rule;
  rule.n = n;
  std::int64_t best_a = 1;
  if (dim > 1) {
    std::vector<std::int64_t> candidates;
    if (n <= 1031) {
      for (std::int64_t a = 2; a <= n / 2; ++a) candidates.push_back(a);
    } else {
      // Deterministic sample of multipliers, plus the golden-section one.
      std::mt19937_64 rng(0x6B6F726F626F76ULL ^ static_cast<std::uint64_t>(n));
      std::uniform_int_distribution<std::int64_t> pick(2, n / 2);
      candidates.push_back(static_cast<std::int64_t>(std::llround(n * (std::numbers::phi - 1.0))) % n);
      const int count = n > 16411 ? 24 : 96;
      for (int c = 0; c < count; ++c) candidates.push_back(pick(rng));
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto a : candidates) {
      if (a < 2) continue;
      const double m = p2_merit(n, dim, a);
      if (m < best) {
        best = m;
        best_a = a;
      }
    }
  }
  rule.z.resize(dim);
  std::int64_t g = 1;
  for (int j = 0; j < dim; ++j) {
    rule.z[j] = g;
    g = (g * best_a) % n;
  }
  return rule;
}

}  // namespace

const KorobovRule& korobov_rule(std::int64_t n, int dim) {
  static std::mutex mutex;
  static std::map<std::pair<std::int64_t, int>, std::unique_ptr<KorobovRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{n, dim}];
  if (!slot) slot = std::make_unique<KorobovRule>(build_rule(n, dim));
  return *slot;
}

double shift_component(std::uint64_t seed, int stage, int shift, int coord) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(stage) << 40));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(shift) << 20));
  h = splitmix64(h ^ static_cast<std::uint64_t>(coord));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace mmsi::lattice
