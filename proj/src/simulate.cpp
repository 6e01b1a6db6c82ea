#include "bdpre/simulate.hpp"

#include <algorithm>
#include <ostream>

#include "bdpre/error.hpp"
#include "bdpre/parallel.hpp"

namespace bdpre {

namespace {

/// Jump for a uniform u in [0, 1): +1 or -l.
std::int64_t choose_jump(const SiteRates& site, double u) {
  double r = u * site.total_rate();
  if (r < site.lambda()) return 1;
  r -= site.lambda();
  std::int64_t fallback = site.lambda() > 0.0 ? 1 : 0;
  for (std::size_t l = 1; l <= site.jump_bound(); ++l) {
    const double m = site.mu(l);
    if (m > 0.0) {
      if (r < m) return -static_cast<std::int64_t>(l);
      fallback = -static_cast<std::int64_t>(l);
    }
    r -= m;
  }
  // u*q rounded up onto the boundary; take the last category with mass.
  return fallback;
}

const SiteRates& live_site(EnvironmentWindow& window, std::int64_t state) {
  const auto& site = window.site(state);
  if (!(site.total_rate() > 0.0)) {
    throw Error(ErrorCode::AbsorbedState, "total rate is 0 at state " + std::to_string(state));
  }
  return site;
}

// A HitState rule targeting the start state fires only on a return visit.
bool rule_fired(const StopRule& stop, std::int64_t state, std::int64_t steps) {
  switch (stop.kind) {
    case StopRule::Kind::HitState: return steps > 0 && state == stop.state;
    case StopRule::Kind::StepCap: return steps >= stop.steps;
    case StopRule::Kind::TimeHorizon: return false;
  }
  return false;
}

}  // namespace

PathRecord simulate_path(EnvironmentWindow& window, std::int64_t start, const StopRule& stop, Rng& rng,
                         std::int64_t step_cap) {
  if (stop.kind == StopRule::Kind::TimeHorizon && !(stop.horizon >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "time horizon must be >= 0");
  }
  PathRecord path;
  path.start_state = start;
  path.step_cap = step_cap;
  std::int64_t state = start;
  std::int64_t steps = 0;
  CompensatedSum clock;
  while (!rule_fired(stop, state, steps)) {
    if (steps >= step_cap) {
      path.censored = true;
      break;
    }
    const auto& site = live_site(window, state);
    const double hold = rng.exponential(site.total_rate());
    if (stop.kind == StopRule::Kind::TimeHorizon && clock.value() + hold > stop.horizon) {
      path.end_time = stop.horizon;
      return path;
    }
    clock.add(hold);
    state += choose_jump(site, rng.uniform());
    ++steps;
    path.events.push_back({clock.value(), state});
  }
  path.end_time = clock.value();
  return path;
}

PassageTime first_passage_time(EnvironmentWindow& window, std::int64_t n, Rng& rng, std::int64_t step_cap) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "passage target must be >= 1");
  PassageTime out;
  std::int64_t state = 0;
  CompensatedSum clock;
  while (state != n) {
    if (out.steps >= step_cap) {
      out.censored = true;
      break;
    }
    const auto& site = live_site(window, state);
    clock.add(rng.exponential(site.total_rate()));
    state += choose_jump(site, rng.uniform());
    ++out.steps;
  }
  out.time = clock.value();
  return out;
}

std::vector<PassageTime> first_passage_times(EnvironmentWindow& window, std::int64_t n, std::size_t replicas,
                                             std::uint64_t seed, std::int64_t step_cap, unsigned threads) {
  std::vector<PassageTime> out(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    auto rng = Rng::stream(seed, Purpose::Path, r);
    out[r] = first_passage_time(window, n, rng, step_cap);
  });
  return out;
}

std::pair<std::int64_t, bool> state_at_time(EnvironmentWindow& window, double horizon, Rng& rng,
                                            std::int64_t step_cap) {
  std::int64_t state = 0;
  CompensatedSum clock;
  for (std::int64_t steps = 0; steps < step_cap; ++steps) {
    const auto& site = live_site(window, state);
    const double hold = rng.exponential(site.total_rate());
    if (clock.value() + hold > horizon) return {state, false};
    clock.add(hold);
    state += choose_jump(site, rng.uniform());
  }
  return {state, true};
}

DiscretePath embedded_chain(const PathRecord& path) {
  DiscretePath out;
  out.censored = path.censored;
  out.states.reserve(path.events.size() + 1);
  out.states.push_back(path.start_state);
  for (const auto& e : path.events) out.states.push_back(e.state);
  return out;
}

DiscretePath simulate_walk(EnvironmentWindow& window, std::int64_t start, const StopRule& stop, Rng& rng,
                           std::int64_t step_cap) {
  if (stop.kind == StopRule::Kind::TimeHorizon) {
    throw Error(ErrorCode::InvalidArgument, "a discrete walk has no clock; use HitState or StepCap");
  }
  DiscretePath path;
  path.states.push_back(start);
  std::int64_t state = start;
  std::int64_t steps = 0;
  while (!rule_fired(stop, state, steps)) {
    if (steps >= step_cap) {
      path.censored = true;
      break;
    }
    state += choose_jump(live_site(window, state), rng.uniform());
    ++steps;
    path.states.push_back(state);
  }
  return path;
}

std::vector<std::uint64_t> CrossingCounts::at(std::int64_t i) const {
  std::vector<std::uint64_t> u(jump_bound, 0);
  if (i == 0) {
    u[0] = 1;
  } else if (i < 0 && i >= depth) {
    const auto k = static_cast<std::size_t>(-1 - i);
    if (k < counts.size()) u = counts[k];
  }
  return u;
}

std::uint64_t CrossingCounts::total(std::int64_t i) const {
  std::uint64_t t = 0;
  for (auto c : at(i)) t += c;
  return t;
}

CrossingCounts crossing_counts(std::span<const std::int64_t> states, std::size_t jump_bound) {
  if (jump_bound < 1) throw Error(ErrorCode::InvalidArgument, "L must be >= 1");
  if (states.size() < 2 || states.front() != 0 || states.back() != 1) {
    throw Error(ErrorCode::PathNotFirstPassage, "path must start at 0 and end at 1");
  }
  const auto L = static_cast<std::int64_t>(jump_bound);
  CrossingCounts out;
  out.jump_bound = jump_bound;
  out.depth = 0;
  for (std::size_t k = 1; k + 1 < states.size(); ++k) {
    if (states[k] >= 1) throw Error(ErrorCode::PathNotFirstPassage, "path visits 1 before its last step");
  }
  for (std::size_t k = 1; k < states.size(); ++k) {
    const auto step = states[k] - states[k - 1];
    if (step != 1 && (step > -1 || step < -L)) {
      throw Error(ErrorCode::PathNotFirstPassage, "step " + std::to_string(step) + " at index " + std::to_string(k) +
                                                      " is not +1 or -1..-L");
    }
    out.depth = std::min(out.depth, states[k]);
  }
  out.counts.assign(static_cast<std::size_t>(-out.depth), std::vector<std::uint64_t>(jump_bound, 0));
  // 0 < k < T_1: the final step is the up-step onto 1.
  for (std::size_t k = 1; k + 1 < states.size(); ++k) {
    const auto from = states[k - 1];
    const auto to = states[k];
    if (to >= from) continue;
    // Landing at to = i - l + 1 from above i: i = to + l - 1, i < from, i <= -1.
    for (std::int64_t l = 1; l <= L; ++l) {
      const auto i = to + l - 1;
      if (i >= from || i > -1) break;
      ++out.counts[static_cast<std::size_t>(-1 - i)][static_cast<std::size_t>(l - 1)];
    }
  }
  return out;
}

std::uint64_t up_steps_from(std::span<const std::int64_t> states, std::int64_t i) {
  std::uint64_t n = 0;
  for (std::size_t k = 1; k < states.size(); ++k) {
    if (states[k - 1] == i && states[k] == i + 1) ++n;
  }
  return n;
}

void write_path_csv(std::ostream& out, std::span<const PathRecord> paths, bool header) {
  if (header) out << "replica,event_index,time,state\n";
  const auto old_precision = out.precision(17);
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const auto& p = paths[r];
    out << r << ",0,0," << p.start_state << '\n';
    for (std::size_t e = 0; e < p.events.size(); ++e) {
      out << r << ',' << e + 1 << ',' << p.events[e].time << ',' << p.events[e].state << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace bdpre
