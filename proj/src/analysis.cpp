#include "bdpre/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "bdpre/branching.hpp"
#include "bdpre/error.hpp"
#include "bdpre/parallel.hpp"

namespace bdpre {

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "both samples must be nonempty");
  std::vector<double> xs(a.begin(), a.end());
  std::vector<double> ys(b.begin(), b.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double na = static_cast<double>(xs.size());
  const double nb = static_cast<double>(ys.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double x = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] == x) ++i;
    while (j < ys.size() && ys[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_1pct(std::size_t n_a, std::size_t n_b) {
  const double a = static_cast<double>(n_a);
  const double b = static_cast<double>(n_b);
  return 1.63 * std::sqrt((a + b) / (a * b));
}

SampleSummary summarize(std::span<const double> xs) {
  SampleSummary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  // Shifted by the first sample: a constant sample has mean exactly x and SE 0.
  const double shift = xs.front();
  double sum = 0.0;
  for (double x : xs) sum += x - shift;
  s.mean = shift + sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return s;
}

namespace {

/// Tracks partial sums of a nonnegative series and decides convergence:
/// the last `window` terms must each be below rel_tol times the partial sum
/// and the geometric tail estimate must be within the same bound.
class SeriesTracker {
 public:
  SeriesTracker(std::size_t window, double rel_tol) : window_(window), rel_tol_(rel_tol) {}

  /// Returns true once converged.
  bool push(double term) {
    sum_.add(term);
    ++terms_;
    recent_.push_back(term);
    if (recent_.size() > window_ + 1) recent_.pop_front();
    if (recent_.size() < window_ + 1) return false;
    const double value = sum_.value();
    for (std::size_t k = 1; k < recent_.size(); ++k) {
      if (!(recent_[k] < rel_tol_ * value)) return false;
    }
    return tail() <= rel_tol_ * value;
  }

  double tail() const {
    if (recent_.size() < 2) return std::numeric_limits<double>::infinity();
    const double last = recent_.back();
    if (last == 0.0) return 0.0;
    const double prev = recent_[recent_.size() - 2];
    double ratio = prev > 0.0 ? last / prev : std::numeric_limits<double>::infinity();
    if (!(ratio < 1.0)) {
      // Period-L structure can make consecutive ratios exceed 1 while the
      // window still decays.
      const double first = recent_.front();
      const double steps = static_cast<double>(recent_.size() - 1);
      ratio = first > 0.0 ? std::pow(last / first, 1.0 / steps) : std::numeric_limits<double>::infinity();
    }
    if (!(ratio < 1.0)) return std::numeric_limits<double>::infinity();
    return last * ratio / (1.0 - ratio);
  }

  SeriesResult result(bool converged) const {
    SeriesResult r;
    r.value = sum_.value();
    r.terms_used = terms_;
    r.converged = converged;
    r.diverging = !converged;
    r.tail_estimate = converged ? tail() : std::numeric_limits<double>::infinity();
    return r;
  }

 private:
  std::size_t window_;
  double rel_tol_;
  CompensatedSum sum_;
  std::int64_t terms_ = 0;
  std::deque<double> recent_;
};

void check_series_args(std::int64_t max_terms, double rel_tol) {
  if (max_terms < 1) throw Error(ErrorCode::InvalidArgument, "max_terms must be >= 1");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw Error(ErrorCode::InvalidArgument, "rel_tol must be in (0, 1)");
}

/// build_M for every atom with lambda > 0, so long series do not rebuild
/// matrices per term.
class AtomMatrices {
 public:
  explicit AtomMatrices(const EnvironmentLaw& law) {
    for (const auto& atom : law.atoms()) {
      matrices_.push_back(atom.rates.lambda() > 0.0 ? build_M(atom.rates) : JumpMatrix());
    }
  }

  /// Site i's rates and matrix; throws ZeroLambdaAtSite.
  std::pair<const SiteRates&, const JumpMatrix&> at(EnvironmentWindow& window, std::int64_t i) const {
    const auto atom = window.atom_at(i);
    const auto& site = window.law().rates(atom);
    if (!(site.lambda() > 0.0)) {
      throw Error(ErrorCode::ZeroLambdaAtSite, "lambda = 0 at site " + std::to_string(i));
    }
    return {site, matrices_[atom]};
  }

 private:
  std::vector<JumpMatrix> matrices_;
};

}  // namespace

SeriesResult quenched_mean_T1(EnvironmentWindow& window, std::int64_t max_terms, double rel_tol) {
  check_series_args(max_terms, rel_tol);
  const auto L = static_cast<Eigen::Index>(window.jump_bound());
  SeriesTracker tracker(static_cast<std::size_t>(L) + 3, rel_tol);
  RowVector v = RowVector::Zero(L);
  v(0) = 1.0;
  RowVector next(L);
  const AtomMatrices matrices(window.law());
  for (std::int64_t k = 0; k < max_terms; ++k) {
    const auto [site, m] = matrices.at(window, -k);
    const double term = v.sum() / site.lambda();
    if (!std::isfinite(term)) return tracker.result(false);
    if (tracker.push(term)) return tracker.result(true);
    next.noalias() = v * m;
    v = next;
  }
  return tracker.result(false);
}

SeriesResult display_series_S(EnvironmentWindow& window, std::int64_t max_terms, double rel_tol) {
  check_series_args(max_terms, rel_tol);
  const auto L = static_cast<Eigen::Index>(window.jump_bound());
  SeriesTracker tracker(static_cast<std::size_t>(L) + 3, rel_tol);
  const AtomMatrices matrices(window.law());
  const double inv_lambda0 = 1.0 / matrices.at(window, 0).first.lambda();
  RowVector v = RowVector::Zero(L);
  v(0) = 1.0;
  RowVector next(L);
  for (std::int64_t n = 1; n <= max_terms; ++n) {
    next.noalias() = v * matrices.at(window, n).second;
    v = next;
    const double term = inv_lambda0 * v.sum();
    if (!std::isfinite(term)) return tracker.result(false);
    if (tracker.push(term)) return tracker.result(true);
  }
  return tracker.result(false);
}

AnnealedEstimate annealed_ET1(const EnvironmentLaw& law, std::int64_t n_env, std::int64_t max_terms, double rel_tol,
                              std::uint64_t seed, unsigned threads) {
  require_conditions(law);
  if (n_env < 1) throw Error(ErrorCode::InvalidArgument, "n_env must be >= 1");
  check_series_args(max_terms, rel_tol);
  const auto n = static_cast<std::size_t>(n_env);
  std::vector<SeriesResult> quenched(n);
  std::vector<SeriesResult> display(n);
  parallel_for(n, threads, [&](std::size_t e) {
    EnvironmentWindow env(law, derive_key(seed, static_cast<std::uint64_t>(Purpose::Environment), e), -1, 1,
                          std::max<std::int64_t>(max_terms, kDefaultLeftGrowthCap));
    quenched[e] = quenched_mean_T1(env, max_terms, rel_tol);
    display[e] = display_series_S(env, max_terms, rel_tol);
  });
  AnnealedEstimate out;
  out.n_env = n_env;
  std::vector<double> values;
  std::vector<double> display_values;
  for (std::size_t e = 0; e < n; ++e) {
    out.diverging = out.diverging || quenched[e].diverging;
    out.display_diverging = out.display_diverging || display[e].diverging;
    values.push_back(quenched[e].value);
    display_values.push_back(display[e].value);
  }
  const auto q = summarize(values);
  const auto d = summarize(display_values);
  constexpr double inf = std::numeric_limits<double>::infinity();
  out.value = out.diverging ? inf : q.mean;
  out.std_error = out.diverging ? inf : q.std_error;
  out.display_value = out.display_diverging ? inf : d.mean;
  out.display_std_error = out.display_diverging ? inf : d.std_error;
  return out;
}

std::string_view to_string(SpeedRegime r) {
  switch (r) {
    case SpeedRegime::PositiveSpeed: return "PositiveSpeed";
    case SpeedRegime::ZeroSpeed: return "ZeroSpeed";
    case SpeedRegime::NotApplicable: return "NotApplicable";
  }
  return "NotApplicable";
}

VelocityReport velocity(const EnvironmentLaw& law, const VelocityOptions& options, std::uint64_t seed) {
  require_conditions(law);
  if (!(options.horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be > 0");
  if (options.n_paths < 1) throw Error(ErrorCode::InvalidArgument, "n_paths must be >= 1");
  VelocityReport report;
  auto lyapunov = options.lyapunov;
  lyapunov.threads = options.threads;
  report.verdict = classify_recurrence(lyapunov_top(law, lyapunov, seed), options.tolerance);
  if (report.verdict.verdict != Recurrence::TransientRight && report.verdict.verdict != Recurrence::Recurrent) {
    report.regime = SpeedRegime::NotApplicable;
    return report;
  }

  const auto annealed = annealed_ET1(law, options.n_env, options.max_terms, options.rel_tol, seed, options.threads);
  report.es_estimate = annealed.value;
  report.es_std_error = annealed.std_error;
  report.es_diverging = annealed.diverging;
  report.es_display_estimate = annealed.display_value;
  if (annealed.diverging) {
    report.regime = SpeedRegime::ZeroSpeed;
  } else {
    report.regime = SpeedRegime::PositiveSpeed;
    report.speed = 1.0 / annealed.value;
  }

  const auto n = static_cast<std::size_t>(options.n_paths);
  std::vector<double> speeds(n);
  std::vector<char> censored(n, 0);
  parallel_for(n, options.threads, [&](std::size_t p) {
    EnvironmentWindow env(law, derive_key(seed, static_cast<std::uint64_t>(Purpose::Window), p), -1, 1);
    auto rng = Rng::stream(seed, Purpose::Path, p);
    const auto [state, capped] = state_at_time(env, options.horizon, rng, options.step_cap);
    speeds[p] = static_cast<double>(state) / options.horizon;
    censored[p] = capped ? 1 : 0;
  });
  const auto s = summarize(speeds);
  report.empirical_speed = s.mean;
  report.empirical_std_error = s.std_error;
  for (char c : censored) report.censored_paths += c;
  return report;
}

DecompositionReport compare_samples(std::span<const double> direct, std::span<const double> reconstructed) {
  DecompositionReport r;
  r.ks_stat = ks_two_sample(direct, reconstructed);
  r.ks_critical = ks_critical_1pct(direct.size(), reconstructed.size());
  const auto a = summarize(direct);
  const auto b = summarize(reconstructed);
  r.mean_direct = a.mean;
  r.se_direct = a.std_error;
  r.mean_reconstructed = b.mean;
  r.se_reconstructed = b.std_error;
  const double combined = std::hypot(a.std_error, b.std_error);
  r.pass = r.ks_stat < r.ks_critical && std::abs(a.mean - b.mean) <= 3.0 * combined;
  return r;
}

EnvironmentWindow decomposition_window(const EnvironmentLaw& law, std::uint64_t seed) {
  return EnvironmentWindow(law, derive_key(seed, static_cast<std::uint64_t>(Purpose::Window)), -64, 64);
}

DecompositionReport compare_decomposition(const EnvironmentLaw& law, std::int64_t n_samples, std::uint64_t seed,
                                          const DecompositionOptions& options) {
  require_conditions(law);
  if (n_samples < 2) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 2");
  auto lyapunov = options.lyapunov;
  lyapunov.threads = options.threads;
  const auto verdict = classify_recurrence(lyapunov_top(law, lyapunov, seed), options.tolerance);
  if (verdict.verdict == Recurrence::TransientLeft) {
    throw Error(ErrorCode::RegimeNotApplicable, "law is transient to the left (gamma_top = " +
                                                    std::to_string(verdict.gamma_estimate.gamma_top) +
                                                    "); T_1 is infinite with positive probability");
  }

  auto env = decomposition_window(law, seed);
  const auto n = static_cast<std::size_t>(n_samples);
  const auto passages = first_passage_times(env, 1, n, seed, options.step_cap, options.threads);

  std::vector<double> rebuilt(n, 0.0);
  std::vector<char> rebuilt_censored(n, 0);
  parallel_for(n, options.threads, [&](std::size_t r) {
    auto branching_rng = Rng::stream(seed, Purpose::Branching, r);
    const auto realization = simulate_branching(env, options.generation_cap, branching_rng);
    if (realization.censored) {
      rebuilt_censored[r] = 1;
      return;
    }
    auto clocks = Rng::stream(seed, Purpose::Clocks, r);
    rebuilt[r] = reconstruct_T1(realization, env, clocks);
  });

  std::vector<double> direct;
  std::vector<double> reconstructed;
  std::int64_t censored_direct = 0;
  std::int64_t censored_rebuilt = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (passages[r].censored) {
      ++censored_direct;
    } else {
      direct.push_back(passages[r].time);
    }
    if (rebuilt_censored[r]) {
      ++censored_rebuilt;
    } else {
      reconstructed.push_back(rebuilt[r]);
    }
  }
  const double limit = 0.01 * static_cast<double>(n);
  if (static_cast<double>(censored_direct) > limit || static_cast<double>(censored_rebuilt) > limit) {
    throw Error(ErrorCode::ExcessCensoring, std::to_string(censored_direct) + " direct and " +
                                                std::to_string(censored_rebuilt) + " reconstructed samples of " +
                                                std::to_string(n) + " were censored");
  }
  auto report = compare_samples(direct, reconstructed);
  report.censored_direct = censored_direct;
  report.censored_reconstructed = censored_rebuilt;
  return report;
}

}  // namespace bdpre
