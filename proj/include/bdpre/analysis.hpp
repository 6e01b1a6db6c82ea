#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bdpre/env.hpp"
#include "bdpre/matrices.hpp"
#include "bdpre/simulate.hpp"

namespace bdpre {

// ---------------------------------------------------------------------------
// Statistics

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - G_b| over the merged
/// sample, with ties stepped together. Throws EmptySample.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic two-sample critical value at the 1% level.
double ks_critical_1pct(std::size_t n_a, std::size_t n_b);

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

SampleSummary summarize(std::span<const double> xs);

// ---------------------------------------------------------------------------
// Quenched and annealed mean of T_1

inline constexpr std::int64_t kDefaultMaxTerms = 1'000'000;

struct SeriesResult {
  double value = 0.0;
  std::int64_t terms_used = 0;
  double tail_estimate = 0.0;
  bool converged = false;
  /// Set when the series did not converge within max_terms (or overflowed);
  /// tail_estimate is then +inf.
  bool diverging = false;
};

/// Partial sums of sum_{i <= 0} (1/lambda_i) e_1 M_0 M_-1 ... M_{i+1} 1 (empty
/// product = identity), one vector-matrix product per term.
SeriesResult quenched_mean_T1(EnvironmentWindow& window, std::int64_t max_terms = kDefaultMaxTerms,
                              double rel_tol = 1e-10);

/// (1/lambda_0) sum_{n >= 1} e_1 M_1 ... M_n 1, i.e. the series whose first
/// term is the product of one matrix. Reported next to the quenched mean
/// because the two differ by the leading 1/lambda_0-type term.
SeriesResult display_series_S(EnvironmentWindow& window, std::int64_t max_terms = kDefaultMaxTerms,
                              double rel_tol = 1e-10);

struct AnnealedEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool diverging = false;
  std::int64_t n_env = 0;
  /// Same average for display_series_S.
  double display_value = 0.0;
  double display_std_error = 0.0;
  bool display_diverging = false;
};

/// Average of quenched_mean_T1 over n_env independent environments;
/// environment e uses window seed derived from (seed, e).
AnnealedEstimate annealed_ET1(const EnvironmentLaw& law, std::int64_t n_env, std::int64_t max_terms, double rel_tol,
                              std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Law of large numbers

enum class SpeedRegime { PositiveSpeed, ZeroSpeed, NotApplicable };

std::string_view to_string(SpeedRegime r);

struct VelocityOptions {
  std::int64_t n_env = 32;
  double horizon = 1'000.0;
  std::int64_t n_paths = 200;
  std::int64_t max_terms = kDefaultMaxTerms;
  double rel_tol = 1e-10;
  double tolerance = 1e-3;
  LyapunovOptions lyapunov;
  std::int64_t step_cap = kDefaultStepCap;
  unsigned threads = 1;
};

struct VelocityReport {
  SpeedRegime regime = SpeedRegime::NotApplicable;
  std::optional<double> speed;
  /// Annealed E T_1; +inf when the series diverges.
  double es_estimate = 0.0;
  double es_std_error = 0.0;
  bool es_diverging = false;
  double es_display_estimate = 0.0;
  double empirical_speed = 0.0;
  double empirical_std_error = 0.0;
  std::int64_t censored_paths = 0;
  RecurrenceVerdict verdict;
};

/// Classifies the law, estimates E T_1 and its reciprocal, and measures
/// N_horizon / horizon over n_paths paths, each in its own environment.
VelocityReport velocity(const EnvironmentLaw& law, const VelocityOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Distributional check of the branching decomposition of T_1

struct DecompositionOptions {
  std::int64_t step_cap = kDefaultStepCap;
  std::int64_t generation_cap = 10'000;
  double tolerance = 1e-3;
  LyapunovOptions lyapunov{20'000, 4, 1'000, 1};
  unsigned threads = 1;
};

struct DecompositionReport {
  double ks_stat = 0.0;
  double ks_critical = 0.0;
  double mean_direct = 0.0;
  double se_direct = 0.0;
  double mean_reconstructed = 0.0;
  double se_reconstructed = 0.0;
  std::int64_t censored_direct = 0;
  std::int64_t censored_reconstructed = 0;
  bool pass = false;
};

/// KS and mean comparison of two samples, the pass rule of
/// compare_decomposition.
DecompositionReport compare_samples(std::span<const double> direct, std::span<const double> reconstructed);

/// Direct first passage times vs reconstruct_T1 over one frozen
/// environment. Throws RegimeNotApplicable when the law classifies as
/// TransientLeft and ExcessCensoring when more than 1% of either side is
/// censored.
DecompositionReport compare_decomposition(const EnvironmentLaw& law, std::int64_t n_samples, std::uint64_t seed,
                                          const DecompositionOptions& options = {});

/// The frozen environment used by compare_decomposition for this seed.
EnvironmentWindow decomposition_window(const EnvironmentLaw& law, std::uint64_t seed);

}  // namespace bdpre
