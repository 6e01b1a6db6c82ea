#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bdpre/env.hpp"

namespace bdpre::testing {

inline EnvironmentLaw one_atom(double lambda, std::vector<double> mu) {
  return EnvironmentLaw::single(SiteRates(lambda, std::move(mu)));
}

/// Half-width of a binomial band: k standard deviations of a frequency.
inline double binomial_band(double p, double n, double k) { return k * std::sqrt(p * (1.0 - p) / n); }

}  // namespace bdpre::testing
