#pragma once

#include "skeva/common.hpp"
#include "skeva/data.hpp"
#include "skeva/kde.hpp"
#include "skeva/parallel.hpp"

#include <cstdio>
#include <cstring>
#include <optional>

namespace skeva {

// Quantities for a KDE f_hat of n i.i.d. draws from a Gaussian mixture f,
// compared against the unimodal reference f0 = phi_{H0}(x - mu0). The
// distance is d = sqrt(d_ISE) throughout.

struct OmegaMatrices {
  Matrix omega0, omega1, omega2;

  const Matrix& operator[](int alpha) const {
    require(alpha >= 0 && alpha <= 2, "omega index must be 0, 1 or 2");
    return alpha == 0 ? omega0 : (alpha == 1 ? omega1 : omega2);
  }
};

/// [Omega_alpha]_ij = phi_{alpha H + S_i + S_j}(mu_i - mu_j).
inline Matrix omega(const GmmModel& gmm, const Bandwidth& h, int alpha) {
  gmm.validate();
  require(alpha >= 0 && alpha <= 2, "omega index must be 0, 1 or 2");
  require(h.dim() == gmm.dim(), "bandwidth and GMM differ in dimension");
  const Index l = gmm.components();
  const Matrix ah = static_cast<double>(alpha) * h.matrix();
  const Vector zero = Vector::Zero(gmm.dim());
  Matrix out(l, l);
  for (Index i = 0; i < l; ++i) {
    for (Index j = i; j < l; ++j) {
      const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
      const Matrix cov = ah + (gmm.covariances[ii] + gmm.covariances[jj]);
      out(i, j) = out(j, i) = gaussian_pdf(gmm.means[ii] - gmm.means[jj], zero, cov);
    }
  }
  return out;
}

inline OmegaMatrices omega_matrices(const GmmModel& gmm, const Bandwidth& h) {
  return {omega(gmm, h, 0), omega(gmm, h, 1), omega(gmm, h, 2)};
}

namespace detail {

// (4 pi)^{-D/2} |B|^{-1/2} = phi_{2B}(0).
inline double self_kernel(const Bandwidth& b) {
  return std::exp(-0.5 * (static_cast<double>(b.dim()) * std::log(4.0 * kPi) + b.log_det()));
}

// sum_l w_l phi_{extra + S_l}(mu_l - mu0)
inline double weighted_cross(const GmmModel& gmm, const Matrix& extra, const Vector& mu0) {
  const Vector zero = Vector::Zero(gmm.dim());
  double s = 0.0;
  for (Index l = 0; l < gmm.components(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    s += gmm.weights(l) * gaussian_pdf(gmm.means[li] - mu0, zero, Matrix(extra + gmm.covariances[li]));
  }
  return s;
}

inline Vector center_or_mean(const GmmModel& gmm, const std::optional<Vector>& mu0) {
  if (!mu0) return gmm.mean();
  require(mu0->size() == gmm.dim(), "reference center has wrong dimension");
  return *mu0;
}

}  // namespace detail

/// delta' = d(f, f0) = sqrt(w'O0w + phi_{2H0}(0) - 2 sum w_l phi_{S_l + H0}(mu_l - mu0)).
inline double delta_prime(const GmmModel& gmm, const Bandwidth& h0, const std::optional<Vector>& mu0 = {}) {
  gmm.validate();
  const Vector c = detail::center_or_mean(gmm, mu0);
  const Vector& w = gmm.weights;
  const double sq = w.dot(omega(gmm, h0, 0) * w) + detail::self_kernel(h0) -
                    2.0 * detail::weighted_cross(gmm, h0.matrix(), c);
  return std::sqrt(std::max(0.0, sq));
}

/// E[d_ISE(f_hat, f0)] over n-point draws from the mixture.
inline double expected_ise_f0(const GmmModel& gmm, const Bandwidth& h, const Bandwidth& h0, Index n,
                              const std::optional<Vector>& mu0 = {}) {
  gmm.validate();
  require(n >= 1, "n must be positive");
  const Vector c = detail::center_or_mean(gmm, mu0);
  const Vector& w = gmm.weights;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double v = detail::self_kernel(h0) + inv_n * detail::self_kernel(h) +
                   (1.0 - inv_n) * w.dot(omega(gmm, h, 2) * w) -
                   2.0 * detail::weighted_cross(gmm, Matrix(h.matrix() + h0.matrix()), c);
  return std::max(0.0, v);
}

/// E[d_ISE(f_hat, f)] over n-point draws from the mixture.
inline double expected_ise_f(const GmmModel& gmm, const Bandwidth& h, Index n) {
  gmm.validate();
  require(n >= 1, "n must be positive");
  const OmegaMatrices om = omega_matrices(gmm, h);
  const Vector& w = gmm.weights;
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix m = (1.0 - inv_n) * om.omega2 - 2.0 * om.omega1 + om.omega0;
  return std::max(0.0, inv_n * detail::self_kernel(h) + w.dot(m * w));
}

/// 2 exp(-n t^2 h (4 pi)^{D/2} / 2), capped at 1: bound on
/// Pr(|d(f, f_hat) - E d(f, f_hat)| >= t) for H = h^2 I.
inline double concentration_envelope(Index n, double h, Index dim, double t) {
  const double e = static_cast<double>(n) * t * t * h * std::pow(4.0 * kPi, 0.5 * static_cast<double>(dim)) / 2.0;
  return std::min(1.0, 2.0 * std::exp(-e));
}

/// Deviation t at which the envelope equals q.
inline double concentration_radius(Index n, double h, Index dim, double q) {
  require(q > 0.0 && q < 1.0, "q must lie in (0,1)");
  return std::sqrt(-2.0 * std::log(q / 2.0) /
                   (static_cast<double>(n) * h * std::pow(4.0 * kPi, 0.5 * static_cast<double>(dim))));
}

struct ThetaTerms {
  double theta1 = 0.0;
  double theta2 = 0.0;
};

inline ThetaTerms theta_terms(const GmmModel& gmm, const Bandwidth& h, const Bandwidth& h0, Index n, double q,
                              const std::optional<Vector>& mu0 = {}) {
  require(q > 0.0 && q < 1.0, "q must lie in (0,1)");
  require(h.is_isotropic(), "theta terms need an isotropic bandwidth H = h^2 I");
  return {concentration_radius(n, h.h(), gmm.dim(), q) + std::sqrt(expected_ise_f(gmm, h, n)),
          delta_prime(gmm, h0, mu0)};
}

/// log(1-p) / log(1 - ratio), floored at 1; the bound is uninformative when
/// ratio >= 1.
inline double draws_bound(double ratio, double p, bool* trivial = nullptr) {
  require(p > 0.0 && p < 1.0, "p must lie in (0,1)");
  const bool uninformative = !(ratio < 1.0);
  double v = 1.0;
  if (!uninformative) v = std::max(1.0, std::log(1.0 - p) / std::log1p(-ratio));
  if (trivial) *trivial = uninformative || v <= 1.0;
  return v;
}

/// Bound for an externally supplied E[d(f_hat, f0)] and delta0 = d(f, f0) - delta.
inline double rho_basic(double expected_d, double delta0, double p) {
  require(delta0 > 0.0, "delta0 must be positive");
  require(expected_d >= 0.0, "expected distance must be nonnegative");
  return draws_bound(expected_d / delta0, p);
}

/// Pr(B_delta) >= 1 - E[d^2(f_hat, f0)] / delta0^2.
inline double markov_lower_bound(double expected_sq, double delta0) {
  require(delta0 > 0.0, "delta0 must be positive");
  return 1.0 - expected_sq / (delta0 * delta0);
}

struct BoundReport {
  double expected_ise_f0 = 0.0;
  double expected_ise_f = 0.0;
  double delta_prime = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double rho_hat = 1.0;
  bool trivial = false;  // rho_hat is the floor value 1
  Index n = 0;
  double h = 0.0;
  double p = 0.0;
  double q = 0.0;
  std::string gmm_digest;
};

inline std::string gmm_digest(const GmmModel& gmm) {
  std::uint64_t acc = 0x5eedULL;
  const auto mix = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    acc = splitmix64(acc ^ bits);
  };
  for (Index l = 0; l < gmm.components(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    mix(gmm.weights(l));
    for (double v : gmm.means[li].reshaped()) mix(v);
    for (double v : gmm.covariances[li].reshaped()) mix(v);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(acc));
  return buf;
}

/// rho_hat = log(1-p) / log(1 - E[d_ISE(f_hat, f0)] / (theta1 + theta2)^2).
inline BoundReport rho_hat(const GmmModel& gmm, const Bandwidth& h, const Bandwidth& h0, Index n, double p,
                           double q, const std::optional<Vector>& mu0 = {}) {
  require(p > 0.0 && p < 1.0, "p must lie in (0,1)");
  require(h.is_isotropic(), "rho_hat needs an isotropic bandwidth H = h^2 I");
  BoundReport r;
  r.n = n;
  r.h = h.h();
  r.p = p;
  r.q = q;
  r.gmm_digest = gmm_digest(gmm);
  r.expected_ise_f0 = expected_ise_f0(gmm, h, h0, n, mu0);
  r.expected_ise_f = expected_ise_f(gmm, h, n);
  const ThetaTerms t = theta_terms(gmm, h, h0, n, q, mu0);
  r.theta1 = t.theta1;
  r.theta2 = t.theta2;
  r.delta_prime = t.theta2;
  r.rho_hat = draws_bound(r.expected_ise_f0 / std::pow(t.theta1 + t.theta2, 2), p, &r.trivial);
  return r;
}

/// rho_hat with H = h^2(C, n) I and H0 = h0_ratio * H.
inline BoundReport rho_hat_rule(const GmmModel& gmm, double c_const, double h0_ratio, Index n, double p, double q,
                                const std::optional<Vector>& mu0 = {}) {
  const Bandwidth h = bandwidth_rule(c_const, n, gmm.dim());
  return rho_hat(gmm, h, h.scaled(h0_ratio), n, p, q, mu0);
}

// ---------------------------------------------------------------------------
// Monte Carlo references.

/// d_ISE between a KDE and a Gaussian mixture.
inline double d_ise_kde_gmm(const KdeModel& kde, const GmmModel& gmm) {
  require(kde.dim() == gmm.dim(), "KDE and GMM differ in dimension");
  const Vector zero = Vector::Zero(kde.dim());
  const double self_kde = std::exp(log_mean_kernel(kde.points, kde.points, kde.bandwidth + kde.bandwidth));
  const double self_gmm = mixture_l2_product(gmm, gmm);
  const Matrix h = kde.bandwidth.matrix();
  double cross = 0.0;
  for (Index l = 0; l < gmm.components(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    cross += gmm.weights(l) * std::exp(log_mean_kernel(kde.points, gmm.means[li],
                                                       Bandwidth::full(h + gmm.covariances[li])));
  }
  return std::max(0.0, self_kde + self_gmm - 2.0 * cross);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> values;
};

inline MonteCarloEstimate summarize(std::vector<double> values) {
  MonteCarloEstimate e;
  const auto m = static_cast<double>(values.size());
  require(values.size() >= 2, "Monte Carlo needs at least two trials");
  for (double v : values) e.mean += v;
  e.mean /= m;
  double ss = 0.0;
  for (double v : values) ss += (v - e.mean) * (v - e.mean);
  e.std_error = std::sqrt(ss / (m - 1.0) / m);
  e.values = std::move(values);
  return e;
}

/// Applies fn(kde) to `trials` independent KDEs of n mixture draws. Trial t
/// uses seed derive_seed(seed, t), so results do not depend on `threads`.
template <typename Fn>
MonteCarloEstimate monte_carlo_kde(const GmmModel& gmm, const Bandwidth& h, Index n, int trials,
                                   std::uint64_t seed, Fn&& fn, int threads = 1) {
  require(trials >= 2, "Monte Carlo needs at least two trials");
  std::vector<double> values(static_cast<std::size_t>(trials));
  parallel_for(values.size(), threads, [&](std::size_t t) {
    const KdeModel kde(sample_gmm(gmm, n, derive_seed(seed, t)).matrix(), h);
    values[t] = fn(kde);
  });
  return summarize(std::move(values));
}

/// Samples of d(f_hat, f) = sqrt(d_ISE(f_hat, f)).
inline MonteCarloEstimate monte_carlo_distance(const GmmModel& gmm, const Bandwidth& h, Index n, int trials,
                                               std::uint64_t seed, int threads = 1) {
  return monte_carlo_kde(
      gmm, h, n, trials, seed, [&](const KdeModel& k) { return std::sqrt(d_ise_kde_gmm(k, gmm)); }, threads);
}

struct BadEventEstimate {
  double probability = 0.0;
  double std_error = 0.0;  // binomial
  int trials = 0;
};

/// Empirical Pr(d(f_hat, f) >= delta).
inline BadEventEstimate monte_carlo_bad_event(const GmmModel& gmm, const Bandwidth& h, Index n, double delta,
                                              int trials, std::uint64_t seed, int threads = 1) {
  const MonteCarloEstimate d = monte_carlo_distance(gmm, h, n, trials, seed, threads);
  BadEventEstimate b;
  b.trials = trials;
  for (double v : d.values) b.probability += (v >= delta) ? 1.0 : 0.0;
  b.probability /= trials;
  b.std_error = std::sqrt(b.probability * (1.0 - b.probability) / trials);
  return b;
}

}  // namespace skeva
