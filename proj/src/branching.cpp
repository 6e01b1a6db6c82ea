#include "bdpre/branching.hpp"

#include <cmath>
#include <limits>

#include "bdpre/error.hpp"
#include "bdpre/simulate.hpp"

namespace bdpre {

namespace {

void require_offspring_site(const SiteRates& site) {
  if (!(site.lambda() > 0.0)) {
    throw Error(ErrorCode::ZeroLambda, "offspring law needs lambda > 0 (no up draw would ever stop it)");
  }
}

void require_parent(const SiteRates& site, std::size_t parent_type) {
  if (parent_type < 1 || parent_type > site.jump_bound()) {
    throw Error(ErrorCode::InvalidArgument, "parent type must be in 1..L");
  }
}

}  // namespace

OffspringLaw::OffspringLaw(const SiteRates& site) : p_up(0.0) {
  require_offspring_site(site);
  const double q = site.total_rate();
  for (double m : site.mu_vector()) p_down.push_back(m / q);
  p_up = site.lambda() / q;
}

CountVector offspring_sample(const SiteRates& site, std::size_t parent_type, Rng& rng) {
  require_offspring_site(site);
  require_parent(site, parent_type);
  const auto L = site.jump_bound();
  CountVector u(L, 0);
  const double q = site.total_rate();
  for (;;) {
    double r = rng.uniform() * q;
    if (r < site.lambda()) break;
    r -= site.lambda();
    std::size_t category = L;
    for (std::size_t l = 1; l <= L; ++l) {
      const double m = site.mu(l);
      if (m > 0.0) {
        category = l;
        if (r < m) break;
      }
      r -= m;
    }
    ++u[category - 1];
  }
  if (parent_type >= 2) ++u[parent_type - 2];
  return u;
}

double offspring_pmf(const SiteRates& site, std::size_t parent_type, std::span<const std::uint64_t> u) {
  require_offspring_site(site);
  require_parent(site, parent_type);
  const auto L = site.jump_bound();
  if (u.size() != L) throw Error(ErrorCode::InvalidArgument, "count vector must have length L");
  CountVector random_part(u.begin(), u.end());
  if (parent_type >= 2) {
    if (random_part[parent_type - 2] == 0) return 0.0;
    --random_part[parent_type - 2];
  }
  const OffspringLaw law(site);
  double total = 0.0;
  double log_p = std::log(law.p_up);
  for (std::size_t l = 0; l < L; ++l) {
    const auto k = random_part[l];
    if (k == 0) continue;
    if (law.p_down[l] == 0.0) return 0.0;
    const double kd = static_cast<double>(k);
    total += kd;
    log_p += kd * std::log(law.p_down[l]) - std::lgamma(kd + 1.0);
  }
  log_p += std::lgamma(total + 1.0);
  return std::exp(log_p);
}

JumpMatrix mean_matrix(const SiteRates& site) { return build_M(site); }

BranchingRealization simulate_branching(EnvironmentWindow& window, std::int64_t generation_cap, Rng& rng) {
  if (generation_cap < 1) throw Error(ErrorCode::InvalidArgument, "generation_cap must be >= 1");
  const auto L = window.jump_bound();
  BranchingRealization out;
  out.jump_bound = L;
  CountVector current(L, 0);
  current[0] = 1;
  out.generations.push_back(current);
  out.totals.push_back(1);
  for (std::int64_t i = 0;; --i) {
    if (-i >= generation_cap) {
      out.censored = true;
      break;
    }
    const auto& site = window.site(i);
    CountVector next(L, 0);
    std::uint64_t total = 0;
    for (std::size_t type = 1; type <= L; ++type) {
      for (std::uint64_t n = 0; n < current[type - 1]; ++n) {
        const auto child = offspring_sample(site, type, rng);
        for (std::size_t l = 0; l < L; ++l) next[l] += child[l];
      }
    }
    for (auto c : next) total += c;
    out.generations.push_back(next);
    out.totals.push_back(total);
    if (total == 0) break;
    current = std::move(next);
  }
  return out;
}

double reconstruct_T1(const BranchingRealization& realization, EnvironmentWindow& window, Rng& clocks) {
  if (realization.censored) {
    throw Error(ErrorCode::CensoredRealization, "realization hit its generation cap before extinction");
  }
  auto rate = [&](std::int64_t i) {
    const double q = window.site(i).total_rate();
    if (!(q > 0.0)) throw Error(ErrorCode::AbsorbedState, "total rate is 0 at site " + std::to_string(i));
    return q;
  };
  CompensatedSum time;
  time.add(clocks.exponential(rate(0)));
  for (std::size_t k = 1; k < realization.generations.size(); ++k) {
    const auto& u = realization.generations[k];
    const auto i = -static_cast<std::int64_t>(k);
    std::uint64_t crossings = 0;
    for (auto c : u) crossings += c;
    if (crossings == 0) continue;
    const double q_here = rate(i);
    const double q_above = rate(i + 1);
    for (std::uint64_t n = 0; n < u[0]; ++n) time.add(clocks.exponential(q_here));
    for (std::uint64_t n = 0; n < crossings; ++n) time.add(clocks.exponential(q_above));
  }
  return time.value();
}

}  // namespace bdpre
