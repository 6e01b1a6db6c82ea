#include "bdpre/env.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "bdpre/error.hpp"
#include "bdpre/rng.hpp"

namespace bdpre {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidLaw: return "InvalidLaw";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ZeroLambda: return "ZeroLambda";
    case ErrorCode::ZeroMuL: return "ZeroMuL";
    case ErrorCode::ConditionsViolated: return "ConditionsViolated";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::AbsorbedState: return "AbsorbedState";
    case ErrorCode::WindowOverflow: return "WindowOverflow";
    case ErrorCode::PathNotFirstPassage: return "PathNotFirstPassage";
    case ErrorCode::CensoredRealization: return "CensoredRealization";
    case ErrorCode::ZeroLambdaAtSite: return "ZeroLambdaAtSite";
    case ErrorCode::ExcessCensoring: return "ExcessCensoring";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::RegimeNotApplicable: return "RegimeNotApplicable";
  }
  return "Unknown";
}

namespace {

bool valid_rate(double r) { return std::isfinite(r) && r >= 0.0; }

std::string describe(const SiteRates& s) {
  std::ostringstream out;
  out << "(lambda=" << s.lambda() << ", mu=(";
  for (std::size_t l = 1; l <= s.jump_bound(); ++l) out << (l > 1 ? "," : "") << s.mu(l);
  out << "))";
  return out.str();
}

}  // namespace

SiteRates::SiteRates(double lambda, std::vector<double> mu) : lambda_(lambda), mu_(std::move(mu)) {
  if (mu_.empty()) throw Error(ErrorCode::InvalidLaw, "mu must have length L >= 1");
  if (!valid_rate(lambda_)) throw Error(ErrorCode::InvalidLaw, "lambda must be finite and >= 0");
  for (double m : mu_) {
    if (!valid_rate(m)) throw Error(ErrorCode::InvalidLaw, "mu entries must be finite and >= 0");
  }
  total_ = lambda_ + std::accumulate(mu_.begin(), mu_.end(), 0.0);
}

EnvironmentLaw::EnvironmentLaw(std::size_t jump_bound, std::vector<Atom> atoms, double weight_tolerance)
    : jump_bound_(jump_bound), atoms_(std::move(atoms)) {
  if (jump_bound_ < 1) throw Error(ErrorCode::InvalidLaw, "L must be a positive integer");
  if (atoms_.empty()) throw Error(ErrorCode::InvalidLaw, "law needs at least one atom");
  double total = 0.0;
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    const auto& atom = atoms_[a];
    if (!(std::isfinite(atom.weight) && atom.weight >= 0.0)) {
      throw Error(ErrorCode::InvalidLaw, "atoms[" + std::to_string(a) + "].weight must be >= 0");
    }
    if (atom.rates.jump_bound() != jump_bound_) {
      throw Error(ErrorCode::InvalidLaw, "atoms[" + std::to_string(a) + "].mu must have length L=" +
                                             std::to_string(jump_bound_));
    }
    total += atom.weight;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > weight_tolerance) {
    throw Error(ErrorCode::InvalidLaw, "atom weights sum to " + std::to_string(total) + ", expected 1");
  }
  // Absorb rounding so pick() never runs off the end.
  cumulative_.back() = 1.0;
}

EnvironmentLaw EnvironmentLaw::single(SiteRates rates) {
  const auto L = rates.jump_bound();
  return EnvironmentLaw(L, {Atom{1.0, std::move(rates)}});
}

std::size_t EnvironmentLaw::pick(double u) const noexcept {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(idx, atoms_.size() - 1);
}

EnvironmentLaw law_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "law must be a JSON object");
  if (!j.contains("L")) throw Error(ErrorCode::ConfigError, "missing key 'L'");
  if (!j.contains("atoms")) throw Error(ErrorCode::ConfigError, "missing key 'atoms'");
  const auto& jl = j.at("L");
  if (!jl.is_number_integer() || jl.get<std::int64_t>() < 1) {
    throw Error(ErrorCode::ConfigError, "key 'L' must be a positive integer");
  }
  const auto L = jl.get<std::size_t>();
  const auto& ja = j.at("atoms");
  if (!ja.is_array()) throw Error(ErrorCode::ConfigError, "key 'atoms' must be an array");
  std::vector<Atom> atoms;
  for (std::size_t a = 0; a < ja.size(); ++a) {
    const auto& item = ja[a];
    const std::string where = "atoms[" + std::to_string(a) + "]";
    if (!item.is_object()) throw Error(ErrorCode::ConfigError, where + " must be an object");
    for (const auto& [key, _] : item.items()) {
      if (key != "weight" && key != "lambda" && key != "mu") {
        throw Error(ErrorCode::ConfigError, "unknown key '" + where + "." + key + "'");
      }
    }
    for (const char* key : {"weight", "lambda", "mu"}) {
      if (!item.contains(key)) throw Error(ErrorCode::ConfigError, "missing key '" + where + "." + key + "'");
    }
    if (!item["weight"].is_number() || !item["lambda"].is_number()) {
      throw Error(ErrorCode::ConfigError, where + ".weight and .lambda must be numbers");
    }
    if (!item["mu"].is_array()) throw Error(ErrorCode::ConfigError, where + ".mu must be an array");
    std::vector<double> mu;
    for (const auto& m : item["mu"]) {
      if (!m.is_number()) throw Error(ErrorCode::ConfigError, where + ".mu entries must be numbers");
      mu.push_back(m.get<double>());
    }
    if (mu.size() != L) {
      throw Error(ErrorCode::ConfigError, where + ".mu must have length L=" + std::to_string(L));
    }
    try {
      atoms.push_back(Atom{item["weight"].get<double>(), SiteRates(item["lambda"].get<double>(), std::move(mu))});
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, where + ": " + e.what());
    }
  }
  try {
    return EnvironmentLaw(L, std::move(atoms), 1e-9);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, std::string("atoms: ") + e.what());
  }
}

nlohmann::json to_json(const EnvironmentLaw& law) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& atom : law.atoms()) {
    atoms.push_back({{"weight", atom.weight}, {"lambda", atom.rates.lambda()}, {"mu", atom.rates.mu_vector()}});
  }
  return {{"L", law.jump_bound()}, {"atoms", atoms}};
}

std::size_t sample_site_atom(const EnvironmentLaw& law, std::uint64_t seed, std::int64_t index) {
  auto rng = Rng::stream(seed, Purpose::Site, static_cast<std::uint64_t>(index));
  return law.pick(rng.uniform());
}

const SiteRates& sample_site(const EnvironmentLaw& law, std::uint64_t seed, std::int64_t index) {
  return law.rates(sample_site_atom(law, seed, index));
}

ConditionReport check_conditions(const EnvironmentLaw& law) {
  ConditionReport report;
  const auto L = law.jump_bound();
  for (std::size_t a = 0; a < law.atoms().size(); ++a) {
    const auto& atom = law.atoms()[a];
    if (atom.weight == 0.0) continue;  // not in the support
    const auto& s = atom.rates;
    const std::string where = "atom " + std::to_string(a) + " " + describe(s);
    if (!(s.total_rate() > 0.0)) {
      report.c1 = false;
      report.violations.push_back("C1: " + where + " has total rate 0");
    }
    if (!(s.lambda() > 0.0)) {
      report.c3 = false;
      report.violations.push_back("C3: " + where + " has lambda = 0, so E ln(lambda/q) = -inf");
    }
    if (!(s.mu(L) > 0.0)) {
      report.c3 = false;
      report.violations.push_back("C3: " + where + " has mu^L = 0, so E ln(mu^L/q) = -inf");
    }
  }
  if (report.c1) {
    report.notes.push_back(
        "C2: support is finite, so total rates are bounded above and both reciprocal-rate series diverge a.s.");
  } else {
    report.c2 = false;
    report.violations.push_back("C2: not certified because C1 fails (reciprocal rates are infinite)");
  }
  return report;
}

void require_conditions(const EnvironmentLaw& law) {
  const auto report = check_conditions(law);
  if (report.ok()) return;
  std::string msg;
  for (const auto& v : report.violations) msg += (msg.empty() ? "" : "; ") + v;
  throw Error(ErrorCode::ConditionsViolated, msg);
}

EnvironmentWindow::EnvironmentWindow(EnvironmentLaw law, std::uint64_t seed, std::int64_t lo, std::int64_t hi,
                                     std::int64_t left_growth_cap)
    : law_(std::move(law)), seed_(seed), lo_(0), hi_(-1) {
  if (lo > hi) throw Error(ErrorCode::InvalidArgument, "window needs lo <= hi");
  if (lo < -kMaxSiteIndex || hi > kMaxSiteIndex) {
    throw Error(ErrorCode::WindowOverflow, "window bounds exceed +-2^40");
  }
  left_limit_ = std::max(-kMaxSiteIndex, lo - std::max<std::int64_t>(left_growth_cap, 0));
  lo_ = lo;
  hi_ = lo - 1;
  grow_locked(lo, hi);
}

EnvironmentWindow::EnvironmentWindow(const EnvironmentWindow& other)
    : law_(other.law_), seed_(other.seed_), left_limit_(other.left_limit_) {
  std::shared_lock lock(other.mutex_);
  atoms_ = other.atoms_;
  lo_ = other.lo_;
  hi_ = other.hi_;
}

void EnvironmentWindow::grow_locked(std::int64_t lo, std::int64_t hi) {
  if (lo < left_limit_) {
    throw Error(ErrorCode::WindowOverflow,
                "site " + std::to_string(lo) + " is below the leftward growth limit " + std::to_string(left_limit_));
  }
  if (hi > kMaxSiteIndex || lo < -kMaxSiteIndex) {
    throw Error(ErrorCode::WindowOverflow, "site index exceeds +-2^40");
  }
  while (lo_ > lo) {
    --lo_;
    atoms_.push_front(static_cast<std::uint32_t>(sample_site_atom(law_, seed_, lo_)));
  }
  while (hi_ < hi) {
    ++hi_;
    atoms_.push_back(static_cast<std::uint32_t>(sample_site_atom(law_, seed_, hi_)));
  }
}

void EnvironmentWindow::extend(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw Error(ErrorCode::InvalidArgument, "extend needs lo <= hi");
  std::unique_lock lock(mutex_);
  grow_locked(std::min(lo, lo_), std::max(hi, hi_));
}

std::size_t EnvironmentWindow::atom_at(std::int64_t i) {
  {
    std::shared_lock lock(mutex_);
    if (i >= lo_ && i <= hi_) return atoms_[static_cast<std::size_t>(i - lo_)];
  }
  std::unique_lock lock(mutex_);
  // Grow in blocks so a walk drifting outward does not lock on every step.
  constexpr std::int64_t kBlock = 64;
  if (i < lo_) {
    grow_locked(std::max(i - kBlock, std::min(i, left_limit_)), hi_);
  } else if (i > hi_) {
    grow_locked(lo_, std::min(i + kBlock, std::max(i, kMaxSiteIndex)));
  }
  return atoms_[static_cast<std::size_t>(i - lo_)];
}

const SiteRates& EnvironmentWindow::site(std::int64_t i) { return law_.rates(atom_at(i)); }

std::int64_t EnvironmentWindow::lo() const {
  std::shared_lock lock(mutex_);
  return lo_;
}

std::int64_t EnvironmentWindow::hi() const {
  std::shared_lock lock(mutex_);
  return hi_;
}

EnvironmentWindow window(const EnvironmentLaw& law, std::uint64_t seed, std::int64_t lo, std::int64_t hi) {
  return EnvironmentWindow(law, seed, lo, hi);
}

}  // namespace bdpre
