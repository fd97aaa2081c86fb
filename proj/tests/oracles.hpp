#pragma once

// Independent reference computations used by the tests: direct density
// formulas and adaptive Gauss-Kronrod quadrature on D in {1, 2}.

#include "skeva/common.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <functional>

namespace oracle {

using skeva::Index;
using skeva::kPi;
using skeva::Matrix;
using skeva::Vector;

/// Gaussian density with a 1x1 or 2x2 covariance, written out explicitly.
inline double normal_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  if (x.size() == 1) {
    const double d = x(0) - mean(0);
    return std::exp(-0.5 * d * d / cov(0, 0)) / std::sqrt(2.0 * kPi * cov(0, 0));
  }
  const double a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
  const double det = a * c - b * b;
  const double dx = x(0) - mean(0), dy = x(1) - mean(1);
  const double q = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
  return std::exp(-0.5 * q) / (2.0 * kPi * std::sqrt(det));
}

/// (1/n) sum_i phi_H(x - p_i).
inline double kde_eval(const Matrix& points, const Matrix& h, const Vector& x) {
  double s = 0.0;
  for (Index i = 0; i < points.cols(); ++i) s += normal_pdf(x, points.col(i), h);
  return s / static_cast<double>(points.cols());
}

struct Box {
  Vector lo, hi;
};

/// Bounding box of the given centers widened by `margin` in every coordinate.
inline Box box_around(const std::vector<Matrix>& centers, double margin) {
  const Index d = centers.front().rows();
  Box b{Vector::Constant(d, skeva::kInf), Vector::Constant(d, -skeva::kInf)};
  for (const auto& c : centers) {
    b.lo = b.lo.cwiseMin(c.rowwise().minCoeff());
    b.hi = b.hi.cwiseMax(c.rowwise().maxCoeff());
  }
  b.lo.array() -= margin;
  b.hi.array() += margin;
  return b;
}

/// Integral of f over a box in D in {1, 2} by (nested) adaptive Gauss-Kronrod.
inline double integrate(const std::function<double(const Vector&)>& f, const Box& box, double tol = 1e-12) {
  using boost::math::quadrature::gauss_kronrod;
  if (box.lo.size() == 1) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double t) { return f(Vector::Constant(1, t)); }, box.lo(0), box.hi(0), 20, tol);
  }
  return gauss_kronrod<double, 31>::integrate(
      [&](double s) {
        return gauss_kronrod<double, 31>::integrate(
            [&](double t) {
              Vector x(2);
              x << s, t;
              return f(x);
            },
            box.lo(1), box.hi(1), 12, tol);
      },
      box.lo(0), box.hi(0), 12, tol);
}

}  // namespace oracle
