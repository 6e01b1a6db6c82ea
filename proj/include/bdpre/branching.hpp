#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bdpre/env.hpp"
#include "bdpre/matrices.hpp"
#include "bdpre/rng.hpp"

namespace bdpre {

using CountVector = std::vector<std::uint64_t>;

/// Category probabilities of one site's crossing-count offspring law:
/// p_l = mu^l / q for the down categories and p_up = lambda / q.
struct OffspringLaw {
  explicit OffspringLaw(const SiteRates& site);

  std::vector<double> p_down;
  double p_up;
};

/// One individual's offspring. Categories are drawn until the first up draw;
/// the down draws are the random part. A parent of type l >= 2 also gets a
/// unit at coordinate l-1. parent_type is 1-based.
CountVector offspring_sample(const SiteRates& site, std::size_t parent_type, Rng& rng);

/// Exact probability of offspring vector u for the given parent type.
double offspring_pmf(const SiteRates& site, std::size_t parent_type, std::span<const std::uint64_t> u);

/// Offspring mean matrix: row l is the mean offspring of a type-l parent.
/// Identical to build_M.
JumpMatrix mean_matrix(const SiteRates& site);

inline constexpr std::int64_t kDefaultGenerationCap = 10'000;

struct BranchingRealization {
  std::size_t jump_bound = 1;
  /// generations[k] = U_{-k}; generations[0] = e_1. The last entry is the
  /// first all-zero generation unless censored.
  std::vector<CountVector> generations;
  std::vector<std::uint64_t> totals;
  bool censored = false;

  bool extinct() const noexcept { return !censored; }
};

/// U_{i-1} is the sum over all individuals of U_i of offspring drawn with
/// the rates at site i.
BranchingRealization simulate_branching(EnvironmentWindow& window, std::int64_t generation_cap, Rng& rng);

/// First passage time assembled from a realization and fresh clocks:
/// one Exp(q_0), U_{i,1} draws of Exp(q_i) and |U_i| draws of Exp(q_{i+1})
/// for every i <= -1.
double reconstruct_T1(const BranchingRealization& realization, EnvironmentWindow& window, Rng& clocks);

}  // namespace bdpre
