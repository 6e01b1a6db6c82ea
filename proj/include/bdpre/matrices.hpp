#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "bdpre/env.hpp"

namespace bdpre {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// L x L matrix whose products drive recurrence and the mean of the
/// crossing-count branching process. Row 1 is (mu^1, ..., mu^L) / lambda;
/// row k >= 2 adds 1 in column k-1.
using JumpMatrix = Matrix;

JumpMatrix build_M(const SiteRates& site);

/// Companion-form matrix with last row (b(1), -b(2), ..., -b(L)).
Matrix build_B(const SiteRates& site);
/// Inverse of build_B: first row (a(1), ..., a(L)) over a shifted identity.
Matrix build_B_inv(const SiteRates& site);

/// Lower-triangular all-ones matrix.
Matrix lambda_matrix(std::size_t L);
Matrix lambda_matrix_inverse(std::size_t L);

/// Max-norm distance between B_1^-1 ... B_n^-1 and Lambda^-1 M_1 ... M_n Lambda.
double lambda_conjugacy_residual(std::span<const SiteRates> sites);

struct LyapunovEstimate {
  double gamma_top = 0.0;
  double std_error = 0.0;
  std::int64_t steps_per_replica = 0;
  std::int64_t replicas = 0;
  std::int64_t burn_in = 0;
};

struct LyapunovOptions {
  std::int64_t steps = 100'000;
  std::int64_t replicas = 8;
  std::int64_t burn_in = 1'000;
  unsigned threads = 1;
};

/// Estimates the top Lyapunov exponent of i.i.d. products of build_M by
/// iterating a positive row vector and averaging log growth. Replica r uses
/// the stream (seed, r) and results are reduced in replica order, so the
/// estimate does not depend on `threads`.
LyapunovEstimate lyapunov_top(const EnvironmentLaw& law, const LyapunovOptions& options, std::uint64_t seed);

/// Dominant eigenvalue of a nonnegative primitive matrix by power iteration.
double spectral_radius(const Matrix& m, double rel_tol = 1e-12, std::int64_t max_iterations = 100'000);

enum class Recurrence { TransientRight, Recurrent, TransientLeft, Inconclusive };

std::string_view to_string(Recurrence r);

struct RecurrenceVerdict {
  Recurrence verdict = Recurrence::Inconclusive;
  LyapunovEstimate gamma_estimate;
  double tolerance = 0.0;
};

/// Recurrent means "gamma_top is indistinguishable from 0 at this
/// tolerance"; no finite run can confirm almost-sure oscillation.
RecurrenceVerdict classify_recurrence(const LyapunovEstimate& est, double tolerance);

}  // namespace bdpre
