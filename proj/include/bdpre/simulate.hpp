#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "bdpre/env.hpp"
#include "bdpre/rng.hpp"

namespace bdpre {

inline constexpr std::int64_t kDefaultStepCap = 10'000'000;

/// When a simulation stops. The step cap of simulate_path is a separate
/// safety guard; hitting it before the rule fires marks the path censored.
struct StopRule {
  enum class Kind { HitState, TimeHorizon, StepCap };
  Kind kind;
  std::int64_t state = 0;
  double horizon = 0.0;
  std::int64_t steps = 0;

  static StopRule hit_state(std::int64_t n) { return {Kind::HitState, n, 0.0, 0}; }
  static StopRule time_horizon(double t) { return {Kind::TimeHorizon, 0, t, 0}; }
  static StopRule step_cap(std::int64_t m) { return {Kind::StepCap, 0, 0.0, m}; }
};

struct PathEvent {
  double time;
  std::int64_t state;
};

struct PathRecord {
  std::int64_t start_state = 0;
  std::vector<PathEvent> events;
  bool censored = false;
  std::int64_t step_cap = 0;
  /// Final time: the hitting/last event time, or the horizon for TimeHorizon.
  double end_time = 0.0;

  std::int64_t final_state() const noexcept { return events.empty() ? start_state : events.back().state; }
};

struct DiscretePath {
  std::vector<std::int64_t> states;
  bool censored = false;
};

/// Neumaier-compensated running sum, used for clocks along long paths.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Continuous-time path: exponential holding time at the current state's
/// total rate, then +1 w.p. lambda/q or -l w.p. mu^l/q.
PathRecord simulate_path(EnvironmentWindow& window, std::int64_t start, const StopRule& stop, Rng& rng,
                         std::int64_t step_cap = kDefaultStepCap);

struct PassageTime {
  double time = 0.0;
  bool censored = false;
  std::int64_t steps = 0;
};

/// First arrival time at n >= 1 starting from 0, without storing the path.
PassageTime first_passage_time(EnvironmentWindow& window, std::int64_t n, Rng& rng,
                               std::int64_t step_cap = kDefaultStepCap);

/// Replicated first passage times; replica r uses stream (seed, r).
std::vector<PassageTime> first_passage_times(EnvironmentWindow& window, std::int64_t n, std::size_t replicas,
                                             std::uint64_t seed, std::int64_t step_cap, unsigned threads);

/// State at time `horizon` starting from 0. The second member is true when
/// the step cap fired first.
std::pair<std::int64_t, bool> state_at_time(EnvironmentWindow& window, double horizon, Rng& rng,
                                            std::int64_t step_cap = kDefaultStepCap);

DiscretePath embedded_chain(const PathRecord& path);

/// Discrete jump chain drawn directly from the transition probabilities.
/// TimeHorizon is not meaningful without clocks and is rejected.
DiscretePath simulate_walk(EnvironmentWindow& window, std::int64_t start, const StopRule& stop, Rng& rng,
                           std::int64_t step_cap = kDefaultStepCap);

/// U_i for i in [depth, -1]; counts[k] holds U_{-1-k}. U_0 = e_1 implicitly.
struct CrossingCounts {
  std::size_t jump_bound = 1;
  std::int64_t depth = 0;
  std::vector<std::vector<std::uint64_t>> counts;

  /// U_i (zero vector outside [depth, -1]; e_1 for i = 0).
  std::vector<std::uint64_t> at(std::int64_t i) const;
  std::uint64_t total(std::int64_t i) const;
};

/// Counts, for each i < 0, down-jumps from above i landing at i-l+1 before
/// the first visit to 1. Throws PathNotFirstPassage unless the path starts
/// at 0 and ends at its first visit to 1.
CrossingCounts crossing_counts(std::span<const std::int64_t> states, std::size_t jump_bound);
inline CrossingCounts crossing_counts(const DiscretePath& path, std::size_t jump_bound) {
  return crossing_counts(path.states, jump_bound);
}

/// Number of steps i -> i+1 in the path, for checking up-step accounting.
std::uint64_t up_steps_from(std::span<const std::int64_t> states, std::int64_t i);

/// CSV dump with header replica,event_index,time,state. Event 0 is the start
/// state at time 0.
void write_path_csv(std::ostream& out, std::span<const PathRecord> paths, bool header = true);

}  // namespace bdpre
