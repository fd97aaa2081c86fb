#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace skeva {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Labels = std::vector<int>;

/// Invalid input or configuration (bad shapes, out-of-range parameters).
class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that could not produce a usable number (Cholesky failure,
/// eigensolver failure, infeasible sampling).
class numerical_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw config_error(message);
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Seeding. Every random stream is derived from a master seed plus a small
// tuple of integers, so results do not depend on scheduling order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t first, Rest... rest) {
  return derive_seed(splitmix64(seed ^ splitmix64(first + 0x632be59bd9b4e019ULL)),
                     static_cast<std::uint64_t>(rest)...);
}

using Rng = std::mt19937_64;

/// Uniform double in [0,1) built from the top 53 bits; unlike
/// std::uniform_real_distribution its output is fixed across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % bound;
}

/// Standard normal via Box-Muller on uniform01.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// `count` distinct indices from [0, population), in uniformly random order.
/// Floyd's algorithm: O(count log count), independent of population.
inline std::vector<Index> sample_without_replacement(Index population, Index count, Rng& rng) {
  require(count >= 0 && count <= population, "sample size exceeds population");
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  std::vector<Index> sorted;
  sorted.reserve(static_cast<std::size_t>(count));
  for (Index j = population - count; j < population; ++j) {
    const auto t = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(j) + 1));
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), t);
    const Index pick = (pos != sorted.end() && *pos == t) ? j : t;
    sorted.insert(std::lower_bound(sorted.begin(), sorted.end(), pick), pick);
    chosen.push_back(pick);
  }
  shuffle(chosen, rng);
  return chosen;
}

// ---------------------------------------------------------------------------
// Position-independent datum keys. Algorithms that promise permutation
// equivariance process columns in the order given by these keys.

inline std::uint64_t hash_column(const Matrix& data, Index col, std::uint64_t salt = 0) {
  std::uint64_t h = splitmix64(salt ^ 0x8c6f1a3d5b7e2904ULL);
  for (Index r = 0; r < data.rows(); ++r) {
    double v = data(r, col);
    if (v == 0.0) v = 0.0;  // fold -0.0
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

/// Column order sorted by (hash, lexicographic value). Identical columns keep
/// their relative input order.
inline std::vector<Index> canonical_order(const Matrix& data, std::uint64_t salt = 0) {
  const Index n = data.cols();
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) keys[static_cast<std::size_t>(i)] = hash_column(data, i, salt);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ka = keys[static_cast<std::size_t>(a)];
    const auto kb = keys[static_cast<std::size_t>(b)];
    if (ka != kb) return ka < kb;
    for (Index r = 0; r < data.rows(); ++r) {
      if (data(r, a) != data(r, b)) return data(r, a) < data(r, b);
    }
    return false;
  });
  return order;
}

inline Matrix select_columns(const Matrix& data, const std::vector<Index>& cols) {
  Matrix out(data.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = data.col(cols[j]);
  return out;
}

/// log(sum(exp(values))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(const Eigen::Ref<const Eigen::ArrayXd>& values) {
  if (values.size() == 0) return -kInf;
  const double m = values.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((values - m).exp().sum());
}

/// Number of distinct labels assuming labels are in {0..K-1}.
inline int label_count(const Labels& labels) {
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  return k;
}

}  // namespace skeva
