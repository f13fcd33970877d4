#pragma once

#include <cstdint>
#include <vector>

namespace mmsi::lattice {

// Rank-1 Korobov lattice: points frac(k * z / n), z = (1, a, a^2, ...) mod n.
struct KorobovRule {
  std::int64_t n = 0;
  std::vector<std::int64_t> z;
};

std::int64_t next_prime(std::int64_t n);

// Point count of sample stage `stage` (roughly doubling, always prime).
std::int64_t stage_size(int stage);

// Korobov rule for `n` points in `dim` dimensions. The multiplier minimizes
// the P_2 figure of merit over a deterministic candidate set; results are
// cached process-wide.
const KorobovRule& korobov_rule(std::int64_t n, int dim);

// P_2 figure of merit (smaller is better) of the rule with multiplier a.
double p2_merit(std::int64_t n, int dim, std::int64_t a);

// Uniform random shift component for (seed, stage, replicate shift, coordinate).
// Components do not depend on the dimension of the problem.
double shift_component(std::uint64_t seed, int stage, int shift, int coord);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mmsi::lattice
