#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bdpre {

/// Rates at one site: lambda for the +1 jump and mu[l-1] for the -l jump.
class SiteRates {
 public:
  SiteRates(double lambda, std::vector<double> mu);

  double lambda() const noexcept { return lambda_; }
  /// Rate of the jump of size -l, l = 1..L.
  double mu(std::size_t l) const { return mu_.at(l - 1); }
  const std::vector<double>& mu_vector() const noexcept { return mu_; }
  std::size_t jump_bound() const noexcept { return mu_.size(); }
  double total_rate() const noexcept { return total_; }

  friend bool operator==(const SiteRates&, const SiteRates&) = default;

 private:
  double lambda_;
  std::vector<double> mu_;
  double total_;
};

struct Atom {
  double weight;
  SiteRates rates;
};

/// Finite-support law of a single site's rates. Sites of an environment are
/// i.i.d. draws from it.
class EnvironmentLaw {
 public:
  /// Throws InvalidLaw unless L >= 1, there is at least one atom, every mu
  /// has length L, and the weights are nonnegative and sum to 1 within
  /// `weight_tolerance`.
  EnvironmentLaw(std::size_t jump_bound, std::vector<Atom> atoms, double weight_tolerance = 1e-12);

  static EnvironmentLaw single(SiteRates rates);

  std::size_t jump_bound() const noexcept { return jump_bound_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const SiteRates& rates(std::size_t atom) const { return atoms_.at(atom).rates; }

  /// Atom index whose cumulative-weight interval contains u in [0, 1).
  std::size_t pick(double u) const noexcept;

 private:
  std::size_t jump_bound_;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
};

/// Parses {"L": int, "atoms": [{"weight", "lambda", "mu"}]}. Keys other than
/// L and atoms are ignored here; RunConfig enforces strictness.
EnvironmentLaw law_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EnvironmentLaw& law);

std::size_t sample_site_atom(const EnvironmentLaw& law, std::uint64_t seed, std::int64_t index);
const SiteRates& sample_site(const EnvironmentLaw& law, std::uint64_t seed, std::int64_t index);

struct ConditionReport {
  bool c1 = true;
  bool c2 = true;
  bool c3 = true;
  std::vector<std::string> violations;
  std::vector<std::string> notes;

  bool ok() const noexcept { return c1 && c2 && c3; }
};

ConditionReport check_conditions(const EnvironmentLaw& law);

/// Throws ConditionsViolated listing the report's violations.
void require_conditions(const EnvironmentLaw& law);

/// Absolute bound on |site index|.
inline constexpr std::int64_t kMaxSiteIndex = std::int64_t{1} << 40;
inline constexpr std::int64_t kDefaultLeftGrowthCap = 1'000'000;

/// A realization of the environment over a lazily grown integer range.
/// Site i always holds sample_site(law, seed, i), so the realized values do
/// not depend on query order or on how the window was grown. Reads and
/// growth may happen from several threads.
class EnvironmentWindow {
 public:
  EnvironmentWindow(EnvironmentLaw law, std::uint64_t seed, std::int64_t lo, std::int64_t hi,
                    std::int64_t left_growth_cap = kDefaultLeftGrowthCap);

  EnvironmentWindow(const EnvironmentWindow& other);
  EnvironmentWindow& operator=(const EnvironmentWindow&) = delete;

  const EnvironmentLaw& law() const noexcept { return law_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t jump_bound() const noexcept { return law_.jump_bound(); }

  /// Rates at site i, growing the window if needed. Throws WindowOverflow
  /// past +-2^40 or past the leftward growth cap.
  const SiteRates& site(std::int64_t i);
  std::size_t atom_at(std::int64_t i);

  /// Grows the window to cover [lo, hi].
  void extend(std::int64_t lo, std::int64_t hi);

  std::int64_t lo() const;
  std::int64_t hi() const;

 private:
  void grow_locked(std::int64_t lo, std::int64_t hi);

  EnvironmentLaw law_;
  std::uint64_t seed_;
  std::int64_t left_limit_;
  mutable std::shared_mutex mutex_;
  std::deque<std::uint32_t> atoms_;
  std::int64_t lo_;
  std::int64_t hi_;
};

EnvironmentWindow window(const EnvironmentLaw& law, std::uint64_t seed, std::int64_t lo, std::int64_t hi);

}  // namespace bdpre
