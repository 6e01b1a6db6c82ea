#include "bdpre/matrices.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bdpre/error.hpp"
#include "bdpre/parallel.hpp"
#include "bdpre/rng.hpp"

namespace bdpre {

namespace {

void require_lambda(const SiteRates& site) {
  if (!(site.lambda() > 0.0)) throw Error(ErrorCode::ZeroLambda, "lambda must be > 0");
}

void require_mu_L(const SiteRates& site) {
  if (!(site.mu(site.jump_bound()) > 0.0)) throw Error(ErrorCode::ZeroMuL, "mu^L must be > 0");
}

}  // namespace

JumpMatrix build_M(const SiteRates& site) {
  require_lambda(site);
  const auto L = static_cast<Eigen::Index>(site.jump_bound());
  JumpMatrix m(L, L);
  for (Eigen::Index c = 0; c < L; ++c) m.col(c).setConstant(site.mu(static_cast<std::size_t>(c) + 1) / site.lambda());
  for (Eigen::Index k = 1; k < L; ++k) m(k, k - 1) += 1.0;
  return m;
}

Matrix build_B(const SiteRates& site) {
  require_lambda(site);
  require_mu_L(site);
  const auto L = site.jump_bound();
  const double mu_L = site.mu(L);
  const auto n = static_cast<Eigen::Index>(L);
  Matrix b = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r + 1 < n; ++r) b(r, r + 1) = 1.0;
  b(n - 1, 0) = site.lambda() / mu_L;
  // b(k) = (mu^{k-1} + ... + mu^L) / mu^L for k >= 2
  for (std::size_t k = 2; k <= L; ++k) {
    double tail = 0.0;
    for (std::size_t l = k - 1; l <= L; ++l) tail += site.mu(l);
    b(n - 1, static_cast<Eigen::Index>(k) - 1) = -tail / mu_L;
  }
  return b;
}

Matrix build_B_inv(const SiteRates& site) {
  require_lambda(site);
  require_mu_L(site);
  const auto L = site.jump_bound();
  const auto n = static_cast<Eigen::Index>(L);
  Matrix inv = Matrix::Zero(n, n);
  // a(k) = (mu^k + ... + mu^L) / lambda
  for (std::size_t k = 1; k <= L; ++k) {
    double tail = 0.0;
    for (std::size_t l = k; l <= L; ++l) tail += site.mu(l);
    inv(0, static_cast<Eigen::Index>(k) - 1) = tail / site.lambda();
  }
  for (Eigen::Index r = 1; r < n; ++r) inv(r, r - 1) = 1.0;
  return inv;
}

Matrix lambda_matrix(std::size_t L) {
  const auto n = static_cast<Eigen::Index>(L);
  return Matrix::Ones(n, n).triangularView<Eigen::Lower>();
}

Matrix lambda_matrix_inverse(std::size_t L) {
  const auto n = static_cast<Eigen::Index>(L);
  Matrix inv = Matrix::Identity(n, n);
  for (Eigen::Index r = 1; r < n; ++r) inv(r, r - 1) = -1.0;
  return inv;
}

double lambda_conjugacy_residual(std::span<const SiteRates> sites) {
  if (sites.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one site");
  const auto L = sites.front().jump_bound();
  const auto n = static_cast<Eigen::Index>(L);
  Matrix b_product = Matrix::Identity(n, n);
  Matrix m_product = Matrix::Identity(n, n);
  for (const auto& site : sites) {
    if (site.jump_bound() != L) throw Error(ErrorCode::InvalidArgument, "sites must share L");
    b_product = b_product * build_B_inv(site);
    m_product = m_product * build_M(site);
  }
  const Matrix conjugated = lambda_matrix_inverse(L) * m_product * lambda_matrix(L);
  return (b_product - conjugated).cwiseAbs().maxCoeff();
}

LyapunovEstimate lyapunov_top(const EnvironmentLaw& law, const LyapunovOptions& options, std::uint64_t seed) {
  require_conditions(law);
  const auto L = law.jump_bound();
  if (options.steps < static_cast<std::int64_t>(L)) {
    throw Error(ErrorCode::InvalidArgument, "steps must be >= L");
  }
  if (options.replicas < 1) throw Error(ErrorCode::InvalidArgument, "replicas must be >= 1");
  if (options.burn_in < 0) throw Error(ErrorCode::InvalidArgument, "burn_in must be >= 0");

  std::vector<JumpMatrix> matrices;
  matrices.reserve(law.atoms().size());
  for (const auto& atom : law.atoms()) matrices.push_back(build_M(atom.rates));

  const auto replicas = static_cast<std::size_t>(options.replicas);
  std::vector<double> rates(replicas);
  parallel_for(replicas, options.threads, [&](std::size_t r) {
    auto rng = Rng::stream(seed, Purpose::Lyapunov, r);
    const auto n = static_cast<Eigen::Index>(L);
    RowVector v = RowVector::Constant(n, 1.0 / static_cast<double>(L));
    RowVector next(n);
    double log_sum = 0.0;
    const std::int64_t total = options.burn_in + options.steps;
    for (std::int64_t t = 0; t < total; ++t) {
      next.noalias() = v * matrices[law.pick(rng.uniform())];
      const double norm = next.lpNorm<1>();
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorCode::NumericalUnderflow, "normalization factor " + std::to_string(norm) + " at step " +
                                                       std::to_string(t) + " of replica " + std::to_string(r));
      }
      v = next / norm;
      if (t >= options.burn_in) log_sum += std::log(norm);
    }
    rates[r] = log_sum / static_cast<double>(options.steps);
  });

  LyapunovEstimate est;
  est.steps_per_replica = options.steps;
  est.replicas = options.replicas;
  est.burn_in = options.burn_in;
  double mean = 0.0;
  for (double g : rates) mean += g;
  mean /= static_cast<double>(replicas);
  est.gamma_top = mean;
  if (replicas > 1) {
    double ss = 0.0;
    for (double g : rates) ss += (g - mean) * (g - mean);
    est.std_error = std::sqrt(ss / static_cast<double>(replicas - 1)) / std::sqrt(static_cast<double>(replicas));
  }
  return est;
}

double spectral_radius(const Matrix& m, double rel_tol, std::int64_t max_iterations) {
  if (m.rows() != m.cols() || m.rows() == 0) throw Error(ErrorCode::InvalidArgument, "matrix must be square");
  if ((m.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "matrix must be nonnegative");
  Eigen::VectorXd x = Eigen::VectorXd::Constant(m.rows(), 1.0 / static_cast<double>(m.rows()));
  double estimate = 0.0;
  for (std::int64_t it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd y = m * x;
    const double norm = y.lpNorm<1>();
    // x has unit 1-norm, so the growth of the 1-norm estimates the eigenvalue.
    if (norm == 0.0) return 0.0;
    y /= norm;
    const bool settled = std::abs(norm - estimate) <= rel_tol * norm && (y - x).lpNorm<1>() <= std::sqrt(rel_tol);
    estimate = norm;
    x = y;
    if (settled && it > 0) return estimate;
  }
  throw Error(ErrorCode::NoConvergence, "power iteration did not converge in " + std::to_string(max_iterations) +
                                            " iterations");
}

std::string_view to_string(Recurrence r) {
  switch (r) {
    case Recurrence::TransientRight: return "TransientRight";
    case Recurrence::Recurrent: return "Recurrent";
    case Recurrence::TransientLeft: return "TransientLeft";
    case Recurrence::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

RecurrenceVerdict classify_recurrence(const LyapunovEstimate& est, double tolerance) {
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be > 0");
  RecurrenceVerdict out{Recurrence::Inconclusive, est, tolerance};
  const double band = std::max(tolerance, 3.0 * est.std_error);
  if (est.gamma_top + band < 0.0) {
    out.verdict = Recurrence::TransientRight;
  } else if (est.gamma_top - band > 0.0) {
    out.verdict = Recurrence::TransientLeft;
  } else if (std::abs(est.gamma_top) <= tolerance && 3.0 * est.std_error <= tolerance) {
    out.verdict = Recurrence::Recurrent;
  }
  return out;
}

}  // namespace bdpre
