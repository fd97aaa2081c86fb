#pragma once

#include "skeva/common.hpp"

#include <chrono>
#include <map>

namespace skeva {

namespace detail {

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// potentials, O(n^3)). Returns row -> column.
inline std::vector<Index> hungarian(const Matrix& cost) {
  const Index n = cost.rows();
  require(cost.cols() == n, "assignment cost must be square");
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
        if (cur < minv[js]) {
          minv[js] = cur;
          way[js] = j0;
        }
        if (minv[js] < delta) {
          delta = minv[js];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) {
          u[static_cast<std::size_t>(p[js])] += delta;
          v[js] -= delta;
        } else {
          minv[js] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

/// Joint counts with labels compacted to 0..K-1 in order of first value.
struct Contingency {
  Matrix counts;  // pred x truth
  double total = 0.0;
};

inline Contingency contingency(const Labels& pred, const Labels& truth) {
  require(pred.size() == truth.size(), "label vectors differ in length");
  require(!pred.empty(), "label vectors are empty");
  std::map<int, Index> pi, ti;
  for (int l : pred) pi.emplace(l, 0);
  for (int l : truth) ti.emplace(l, 0);
  Index k = 0;
  for (auto& [l, i] : pi) i = k++;
  k = 0;
  for (auto& [l, i] : ti) i = k++;
  Contingency c;
  c.counts = Matrix::Zero(static_cast<Index>(pi.size()), static_cast<Index>(ti.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) c.counts(pi[pred[i]], ti[truth[i]]) += 1.0;
  c.total = static_cast<double>(pred.size());
  return c;
}

inline double entropy(const Vector& counts, double total) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  return h;
}

}  // namespace detail

/// Fraction of points correctly labeled under the best one-to-one matching
/// of predicted to true clusters.
inline double accuracy(const Labels& pred, const Labels& truth) {
  const detail::Contingency c = detail::contingency(pred, truth);
  const Index k = std::max(c.counts.rows(), c.counts.cols());
  Matrix cost = Matrix::Zero(k, k);
  cost.topLeftCorner(c.counts.rows(), c.counts.cols()) = -c.counts;
  const auto match = detail::hungarian(cost);
  double hits = 0.0;
  for (Index i = 0; i < c.counts.rows(); ++i) {
    const Index j = match[static_cast<std::size_t>(i)];
    if (j < c.counts.cols()) hits += c.counts(i, j);
  }
  return hits / c.total;
}

/// I(pred; truth) / max(H(pred), H(truth)), natural log. When both entropies
/// vanish the partitions are identical (one cluster each) and NMI is 1.
inline double nmi(const Labels& pred, const Labels& truth) {
  detail::Contingency c = detail::contingency(pred, truth);
  // Orient the table by a fixed rule so nmi(a,b) and nmi(b,a) sum identically.
  if (std::lexicographical_compare(truth.begin(), truth.end(), pred.begin(), pred.end()))
    c.counts.transposeInPlace();
  const Vector rows = c.counts.rowwise().sum();
  const Vector cols = c.counts.colwise().sum().transpose();
  const double hr = detail::entropy(rows, c.total);
  const double hc = detail::entropy(cols, c.total);
  const double denom = std::max(hr, hc);
  if (denom <= 0.0) return 1.0;
  double mi = 0.0;
  for (Index i = 0; i < c.counts.rows(); ++i) {
    for (Index j = 0; j < c.counts.cols(); ++j) {
      const double nij = c.counts(i, j);
      if (nij > 0.0) mi += (nij / c.total) * std::log(nij * c.total / (rows(i) * cols(j)));
    }
  }
  return std::clamp(mi / denom, 0.0, 1.0);
}

/// Runs fn and returns its wall-clock duration in seconds (steady clock).
template <typename Fn>
double timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::forward<Fn>(fn)();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct EvalResult {
  std::string algorithm;
  double accuracy = 0.0;
  double nmi = 0.0;
  double wall_time_s = 0.0;
  std::string config_digest;
};

inline EvalResult evaluate(std::string algorithm, const Labels& pred, const Labels& truth, double wall_time_s,
                           std::string config_digest = {}) {
  return {std::move(algorithm), accuracy(pred, truth), nmi(pred, truth), wall_time_s, std::move(config_digest)};
}

}  // namespace skeva
