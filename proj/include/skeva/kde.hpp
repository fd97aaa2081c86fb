#pragma once

#include "skeva/common.hpp"
#include "skeva/data.hpp"

namespace skeva {

/// Symmetric positive-definite kernel covariance H. The isotropic case
/// H = h^2 I is stored as the scalar h^2; all determinants are kept as logs
/// because h^D underflows for large D.
class Bandwidth {
public:
  Bandwidth() = default;

  static Bandwidth isotropic(double h2, Index dim) {
    require(dim >= 1, "bandwidth dimension must be positive");
    require(h2 > 0.0 && std::isfinite(h2), "isotropic bandwidth must be positive and finite");
    Bandwidth b;
    b.dim_ = dim;
    b.scale_ = h2;
    b.log_det_ = static_cast<double>(dim) * std::log(h2);
    return b;
  }

  static Bandwidth full(Matrix h) {
    require(h.rows() == h.cols() && h.rows() >= 1, "bandwidth matrix must be square");
    Bandwidth b;
    b.dim_ = h.rows();
    b.llt_ = Eigen::LLT<Matrix>(h);
    if (b.llt_.info() != Eigen::Success) throw numerical_error("bandwidth matrix is not positive definite");
    const Matrix l = b.llt_.matrixL();
    b.log_det_ = 2.0 * l.diagonal().array().log().sum();
    b.matrix_ = std::move(h);
    return b;
  }

  bool is_isotropic() const { return matrix_.size() == 0; }
  Index dim() const { return dim_; }
  double log_det() const { return log_det_; }

  /// h^2 of an isotropic bandwidth.
  double scale() const {
    require(is_isotropic(), "scale() needs an isotropic bandwidth");
    return scale_;
  }
  double h() const { return std::sqrt(scale()); }

  Matrix matrix() const {
    return is_isotropic() ? Matrix(scale_ * Matrix::Identity(dim_, dim_)) : matrix_;
  }

  Bandwidth scaled(double factor) const {
    require(factor > 0.0, "bandwidth scale factor must be positive");
    return is_isotropic() ? isotropic(scale_ * factor, dim_) : full(matrix_ * factor);
  }

  friend Bandwidth operator+(const Bandwidth& a, const Bandwidth& b) {
    require(a.dim_ == b.dim_, "bandwidth dimension mismatch");
    if (a.is_isotropic() && b.is_isotropic()) return isotropic(a.scale_ + b.scale_, a.dim_);
    return full(a.matrix() + b.matrix());
  }

  /// Mahalanobis squared norm x^T H^{-1} x.
  double mahalanobis_sq(const Eigen::Ref<const Vector>& x) const {
    if (is_isotropic()) return x.squaredNorm() / scale_;
    return llt_.matrixL().solve(x).squaredNorm();
  }

  /// Maps points so that H becomes the identity (L^{-1} x).
  Matrix whiten(const Matrix& points) const {
    if (is_isotropic()) return points / std::sqrt(scale_);
    return llt_.matrixL().solve(points);
  }

private:
  Index dim_ = 0;
  double scale_ = 0.0;
  double log_det_ = 0.0;
  Matrix matrix_;
  Eigen::LLT<Matrix> llt_;
};

/// Gaussian kernel density estimate (1/n) sum_i phi_H(x - x_i).
struct KdeModel {
  Matrix points;  // D x n kernel centers
  Bandwidth bandwidth;

  KdeModel() = default;
  KdeModel(Matrix pts, Bandwidth bw) : points(std::move(pts)), bandwidth(std::move(bw)) {
    require(points.cols() >= 1, "KDE needs at least one point");
    require(points.rows() == bandwidth.dim(), "KDE points and bandwidth differ in dimension");
  }
  Index size() const { return points.cols(); }
  Index dim() const { return points.rows(); }
};

/// Single Gaussian phi_{H0}(x - center), the unimodal reference density.
struct UnimodalRef {
  Vector center;
  Bandwidth bandwidth;
};

inline double log_gaussian_pdf(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mean,
                               const Bandwidth& cov) {
  require(x.size() == cov.dim() && mean.size() == cov.dim(), "gaussian_pdf dimension mismatch");
  const auto d = static_cast<double>(cov.dim());
  return -0.5 * (d * std::log(2.0 * kPi) + cov.log_det() + cov.mahalanobis_sq(x - mean));
}

/// Multivariate normal density, evaluated in the log domain.
inline double gaussian_pdf(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mean,
                           const Matrix& cov) {
  return std::exp(log_gaussian_pdf(x, mean, Bandwidth::full(cov)));
}

inline double gaussian_pdf(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mean,
                           const Bandwidth& cov) {
  return std::exp(log_gaussian_pdf(x, mean, cov));
}

/// log of the Gaussian product integral: log phi_{A+B}(mean_a - mean_b).
inline double log_convolve_eval(const Eigen::Ref<const Vector>& mean_a, const Bandwidth& cov_a,
                                const Eigen::Ref<const Vector>& mean_b, const Bandwidth& cov_b) {
  const Vector zero = Vector::Zero(mean_a.size());
  return log_gaussian_pdf(mean_a - mean_b, zero, cov_a + cov_b);
}

/// Integral of phi_A(x - mean_a) phi_B(x - mean_b) over R^D.
inline double convolve_eval(const Eigen::Ref<const Vector>& mean_a, const Bandwidth& cov_a,
                            const Eigen::Ref<const Vector>& mean_b, const Bandwidth& cov_b) {
  return std::exp(log_convolve_eval(mean_a, cov_a, mean_b, cov_b));
}

inline double convolve_eval(const Eigen::Ref<const Vector>& mean_a, const Matrix& cov_a,
                            const Eigen::Ref<const Vector>& mean_b, const Matrix& cov_b) {
  return convolve_eval(mean_a, Bandwidth::full(cov_a), mean_b, Bandwidth::full(cov_b));
}

/// h(C, n) = [C D / (n (4 pi)^{D/2})]^{1/(D+4)}; returns H = h^2 I.
inline Bandwidth bandwidth_rule(double c_const, Index n, Index dim) {
  require(c_const > 0.0, "bandwidth constant C must be positive");
  require(n >= 1 && dim >= 1, "bandwidth rule needs n >= 1 and D >= 1");
  const double d = static_cast<double>(dim);
  const double log_h = (std::log(c_const) + std::log(d) - std::log(static_cast<double>(n)) -
                        0.5 * d * std::log(4.0 * kPi)) /
                       (d + 4.0);
  return Bandwidth::isotropic(std::exp(2.0 * log_h), dim);
}

// ---------------------------------------------------------------------------
// Closed-form L2 inner products between Gaussian mixtures with equal-weight
// components. Everything is accumulated as log-sum-exp.

/// log( (1/(n m)) sum_i sum_j phi_S(a_i - b_j) ).
inline double log_mean_kernel(const Matrix& a, const Matrix& b, const Bandwidth& s) {
  require(a.rows() == b.rows() && a.rows() == s.dim(), "kernel sum dimension mismatch");
  require(a.cols() >= 1 && b.cols() >= 1, "kernel sum needs nonempty point sets");
  // Center on a common origin to limit cancellation in the Gram expansion.
  const Vector origin = 0.5 * (a.rowwise().mean() + b.rowwise().mean());
  const Matrix wa = s.whiten(a.colwise() - origin);
  const Matrix wb = s.whiten(b.colwise() - origin);
  const Eigen::ArrayXd na = wa.colwise().squaredNorm().transpose();
  const Eigen::Array<double, 1, Eigen::Dynamic> nb = wb.colwise().squaredNorm().array();
  // Column blocks keep the working set in cache; the log-sum-exp is merged
  // across blocks in a fixed order, so the result is deterministic.
  constexpr Index kBlock = 256;
  const Index rows = wa.cols();
  const Index block = std::max<Index>(1, std::min<Index>(b.cols(), (kBlock * kBlock) / std::max<Index>(rows, 1)));
  double run_max = -kInf, run_sum = 0.0;
  Eigen::ArrayXXd sq;
  for (Index j0 = 0; j0 < wb.cols(); j0 += block) {
    const Index w = std::min(block, wb.cols() - j0);
    sq = (-2.0 * (wa.transpose() * wb.middleCols(j0, w))).array();
    sq.colwise() += na;
    sq.rowwise() += nb.segment(j0, w);
    sq = -0.5 * sq.max(0.0);
    const double m = sq.maxCoeff();
    if (m > run_max) {
      run_sum = run_sum * std::exp(run_max - m);
      run_max = m;
    }
    run_sum += (sq - run_max).exp().sum();
  }
  const double d = static_cast<double>(s.dim());
  const double log_norm = -0.5 * (d * std::log(2.0 * kPi) + s.log_det());
  return log_norm + run_max + std::log(run_sum) - std::log(static_cast<double>(a.cols())) -
         std::log(static_cast<double>(b.cols()));
}

/// log of the three L2 inner products <a,a>, <b,b>, <a,b>.
struct LogInnerProducts {
  double self_a = 0.0;
  double self_b = 0.0;
  double cross = 0.0;
};

namespace detail {
// Fixed operand order for the cross term so that swapping the arguments
// reproduces the same floating-point operations.
inline bool points_before(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) return a.cols() < b.cols();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}
}  // namespace detail

inline LogInnerProducts log_inner_products(const KdeModel& a, const KdeModel& b) {
  require(a.dim() == b.dim(), "KDE dimension mismatch");
  const bool swap = detail::points_before(b.points, a.points);
  const KdeModel& first = swap ? b : a;
  const KdeModel& second = swap ? a : b;
  return {log_mean_kernel(a.points, a.points, a.bandwidth + a.bandwidth),
          log_mean_kernel(b.points, b.points, b.bandwidth + b.bandwidth),
          log_mean_kernel(first.points, second.points, first.bandwidth + second.bandwidth)};
}

inline LogInnerProducts log_inner_products(const KdeModel& a, const UnimodalRef& r) {
  require(a.dim() == r.center.size() && a.dim() == r.bandwidth.dim(), "KDE / reference dimension mismatch");
  const Vector zero = Vector::Zero(a.dim());
  return {log_mean_kernel(a.points, a.points, a.bandwidth + a.bandwidth),
          log_gaussian_pdf(zero, zero, r.bandwidth + r.bandwidth),
          log_mean_kernel(a.points, r.center, a.bandwidth + r.bandwidth)};
}

/// <a,a> + <b,b> - 2<a,b>, clamped at 0.
inline double ise_from_logs(const LogInnerProducts& p) {
  const double m = std::max({p.self_a, p.self_b, p.cross});
  if (!std::isfinite(m)) return m > 0 ? kInf : 0.0;
  const double v = std::exp(p.self_a - m) + std::exp(p.self_b - m) - 2.0 * std::exp(p.cross - m);
  return std::max(0.0, v) * std::exp(m);
}

/// Cauchy-Schwarz divergence. When the normalized cross term
/// <a,b> / sqrt(<a,a><b,b>) underflows to 0 in double precision the value is
/// +inf and `cross_underflow` is set.
struct CsDivergence {
  double value = 0.0;
  bool cross_underflow = false;
  operator double() const { return value; }  // NOLINT
};

inline CsDivergence cs_from_logs(const LogInnerProducts& p) {
  const double log_ratio = p.cross - 0.5 * (p.self_a + p.self_b);
  if (!std::isfinite(p.cross) || std::exp(log_ratio) == 0.0) return {kInf, true};
  return {std::max(0.0, -2.0 * p.cross + (p.self_a + p.self_b)), false};
}

inline double d_ise_kde_kde(const KdeModel& a, const KdeModel& b) { return ise_from_logs(log_inner_products(a, b)); }
inline double d_ise_kde_ref(const KdeModel& a, const UnimodalRef& r) { return ise_from_logs(log_inner_products(a, r)); }
inline CsDivergence d_cs_kde_kde(const KdeModel& a, const KdeModel& b) { return cs_from_logs(log_inner_products(a, b)); }
inline CsDivergence d_cs_kde_ref(const KdeModel& a, const UnimodalRef& r) { return cs_from_logs(log_inner_products(a, r)); }

/// Integral of g1 * g2 for two Gaussian mixtures.
inline double mixture_l2_product(const GmmModel& g1, const GmmModel& g2) {
  require(g1.dim() == g2.dim(), "GMM dimension mismatch");
  double sum = 0.0;
  for (Index l = 0; l < g1.components(); ++l) {
    for (Index m = 0; m < g2.components(); ++m) {
      const auto li = static_cast<std::size_t>(l), mi = static_cast<std::size_t>(m);
      sum += g1.weights(l) * g2.weights(m) *
             convolve_eval(g1.means[li], g1.covariances[li], g2.means[mi], g2.covariances[mi]);
    }
  }
  return sum;
}

}  // namespace skeva
