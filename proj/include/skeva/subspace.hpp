#pragma once

#include "skeva/common.hpp"
#include "skeva/data.hpp"

#include <optional>

namespace skeva {

/// Symmetric nonnegative N x N similarity matrix with zero diagonal.
class Affinity {
public:
  explicit Affinity(Matrix weights) : weights_(std::move(weights)) {
    require(weights_.rows() == weights_.cols() && weights_.rows() >= 1, "affinity must be square and nonempty");
    require(weights_ == weights_.transpose(), "affinity must be exactly symmetric");
    require((weights_.array() >= 0.0).all() && weights_.allFinite(), "affinity entries must be finite and nonnegative");
    require((weights_.diagonal().array() == 0.0).all(), "affinity diagonal must be zero");
  }

  /// |W| + |W|^T with the diagonal cleared.
  static Affinity from_coefficients(const Matrix& w) {
    Matrix a = w.cwiseAbs();
    a = (a + a.transpose()).eval();
    a.diagonal().setZero();
    return Affinity(std::move(a));
  }

  Index size() const { return weights_.rows(); }
  const Matrix& weights() const { return weights_; }

  /// Unnormalized graph Laplacian L = D - A; row sums are zero.
  Matrix laplacian() const {
    Matrix l = -weights_;
    for (Index i = 0; i < size(); ++i) {
      double degree = 0.0;
      for (Index j = 0; j < size(); ++j) degree += weights_(i, j);
      l(i, i) = degree;
    }
    return l;
  }

private:
  Matrix weights_;
};

/// Hard labels in {0..K-1}, optionally with a K x N soft assignment.
struct ClusterAssignment {
  Labels labels;
  int clusters = 0;
  Matrix soft;  // empty when hard only
};

namespace detail {

template <typename Fn>
ClusterAssignment with_canonical_order(const Matrix& data, Fn&& run) {
  const auto order = canonical_order(data);
  const Matrix sorted = select_columns(data, order);
  ClusterAssignment inner = run(sorted);
  ClusterAssignment out = inner;
  for (std::size_t i = 0; i < order.size(); ++i)
    out.labels[static_cast<std::size_t>(order[i])] = inner.labels[i];
  if (inner.soft.size() != 0)
    for (std::size_t i = 0; i < order.size(); ++i) out.soft.col(order[i]) = inner.soft.col(static_cast<Index>(i));
  return out;
}

inline double sq_dist(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  return (a - b).squaredNorm();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// K-means (the U_k = 0 special case of subspace clustering).

struct KMeansResult {
  ClusterAssignment assignment;
  Matrix centroids;                // D x K
  double sse = 0.0;
  std::vector<double> sse_trace;   // after each centroid update
  int iterations = 0;
};

namespace detail {

inline Matrix kmeans_pp_seed(const Matrix& x, int k, Rng& rng) {
  const Index n = x.cols();
  Matrix c(x.rows(), k);
  c.col(0) = x.col(static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n))));
  Eigen::ArrayXd best(n);
  for (Index i = 0; i < n; ++i) best(i) = sq_dist(x.col(i), c.col(0));
  for (int j = 1; j < k; ++j) {
    const double total = best.sum();
    Index pick = 0;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        if (best(i) <= 0.0) continue;
        if (target < best(i)) {
          pick = i;
          break;
        }
        target -= best(i);
      }
      while (best(pick) <= 0.0 && pick > 0) --pick;
    } else {
      pick = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    }
    c.col(j) = x.col(pick);
    for (Index i = 0; i < n; ++i) best(i) = std::min(best(i), sq_dist(x.col(i), c.col(j)));
  }
  return c;
}

inline KMeansResult lloyd(const Matrix& x, int k, Matrix centroids, int max_iter) {
  const Index n = x.cols();
  KMeansResult res;
  Labels labels(static_cast<std::size_t>(n), -1);
  Eigen::ArrayXd dist(n);
  for (int it = 0; it < std::max(1, max_iter); ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int arg = 0;
      double bestd = kInf;
      for (int j = 0; j < k; ++j) {
        const double d = sq_dist(x.col(i), centroids.col(j));
        if (d < bestd) {
          bestd = d;
          arg = j;
        }
      }
      dist(i) = bestd;
      if (labels[static_cast<std::size_t>(i)] != arg) changed = true;
      labels[static_cast<std::size_t>(i)] = arg;
    }
    // Empty-cluster repair: the worst-fit point of a multi-point cluster
    // becomes a singleton.
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) continue;
      Index worst = -1;
      for (Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] < 2) continue;
        if (worst < 0 || dist(i) > dist(worst)) worst = i;
      }
      if (worst < 0) break;
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(worst)])];
      labels[static_cast<std::size_t>(worst)] = j;
      counts[static_cast<std::size_t>(j)] = 1;
      dist(worst) = 0.0;
      changed = true;
    }
    centroids.setZero();
    for (Index i = 0; i < n; ++i) centroids.col(labels[static_cast<std::size_t>(i)]) += x.col(i);
    for (int j = 0; j < k; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0) centroids.col(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
    double sse = 0.0;
    for (Index i = 0; i < n; ++i) sse += sq_dist(x.col(i), centroids.col(labels[static_cast<std::size_t>(i)]));
    res.sse_trace.push_back(sse);
    res.iterations = it + 1;
    if (!changed) break;
  }
  res.sse = res.sse_trace.back();
  res.centroids = std::move(centroids);
  res.assignment = {std::move(labels), k, {}};
  return res;
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeds; the best of `restarts` runs (by SSE)
/// is returned. Columns are processed in canonical order so that permuting the
/// input permutes the labels identically.
inline KMeansResult kmeans(const Matrix& data, int k, std::uint64_t seed, int max_iter = 300, int restarts = 1) {
  require(k >= 1 && k <= data.cols(), "k-means needs 1 <= K <= N");
  require(restarts >= 1, "k-means needs at least one restart");
  const auto order = canonical_order(data);
  const Matrix x = select_columns(data, order);
  std::optional<KMeansResult> best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, 11, static_cast<std::uint64_t>(r)));
    KMeansResult res = detail::lloyd(x, k, detail::kmeans_pp_seed(x, k, rng), max_iter);
    if (!best || res.sse < best->sse) best = std::move(res);
  }
  KMeansResult out = std::move(*best);
  Labels labels(out.assignment.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) labels[static_cast<std::size_t>(order[i])] = out.assignment.labels[i];
  out.assignment.labels = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------

/// Unnormalized spectral clustering: the K eigenvectors of L = D - A with the
/// smallest eigenvalues embed the vertices, and the embedded rows are grouped
/// by k-means (5 restarts).
inline ClusterAssignment spectral_cluster(const Affinity& aff, int k, std::uint64_t seed, int kmeans_restarts = 5) {
  require(k >= 1 && k <= aff.size(), "spectral clustering needs 1 <= K <= N");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(aff.laplacian());
  if (eig.info() != Eigen::Success) throw numerical_error("Laplacian eigendecomposition failed");
  const Matrix embedding = eig.eigenvectors().leftCols(k).transpose();  // K x N
  return kmeans(embedding, k, derive_seed(seed, 21), 300, kmeans_restarts).assignment;
}

// ---------------------------------------------------------------------------
// Sparse subspace clustering.

struct AdmmParams {
  double rho = 0.0;        // initial penalty; <= 0 selects 2 * lambda * mean ||x_i||^2
  int max_iter = 2000;
  double tol = 1e-7;
  bool adapt_rho = true;   // residual balancing: rescale rho when residuals differ by > 10x
};

struct SscSolution {
  Matrix coefficients;  // W, N x N, diag(W) = 0, 1^T W = 1^T
  double lambda = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;  // objective of the projected (feasible) iterate per iteration
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
};

/// ||W||_1 + lambda ||X - X W||_F^2.
inline double ssc_objective(const Matrix& x, const Matrix& w, double lambda) {
  return w.cwiseAbs().sum() + lambda * (x - x * w).squaredNorm();
}

namespace detail {

/// Restores 1^T w = 1 on each column by spreading the deficit over that
/// column's off-diagonal support (all off-diagonal entries if it is empty).
inline void project_affine(Matrix& w) {
  const Index n = w.cols();
  for (Index i = 0; i < n; ++i) {
    const double deficit = 1.0 - w.col(i).sum();
    if (deficit == 0.0) continue;
    Index support = 0;
    for (Index j = 0; j < n; ++j)
      if (j != i && w(j, i) != 0.0) ++support;
    const bool spread_all = support == 0;
    const double share = deficit / static_cast<double>(spread_all ? n - 1 : support);
    for (Index j = 0; j < n; ++j)
      if (j != i && (spread_all || w(j, i) != 0.0)) w(j, i) += share;
  }
}

}  // namespace detail

/// Solves min ||W||_1 + lambda ||X - XW||_F^2 s.t. W^T 1 = 1, diag(W) = 0 with
/// an alternating-direction augmented Lagrangian. The smooth copy Z carries
/// the affine constraint; the sparse copy C gets soft-thresholding with a
/// zeroed diagonal. The returned W is C after an exact affine projection.
inline SscSolution ssc_solve(const Matrix& x, double lambda, const AdmmParams& params = {}) {
  const Index n = x.cols();
  require(n >= 2, "SSC needs at least two data");
  require(lambda > 0.0, "SSC lambda must be positive");
  const Matrix gram = x.transpose() * x;
  const double mean_norm = gram.diagonal().mean();
  double rho = params.rho > 0.0 ? params.rho : 2.0 * lambda * std::max(mean_norm, 1e-12);

  Eigen::LLT<Matrix> llt;
  const auto factor = [&] {
    Matrix system = 2.0 * lambda * gram;
    system.diagonal().array() += rho;
    system.array() += rho;  // rho * 1 1^T
    llt.compute(system);
    if (llt.info() != Eigen::Success) throw numerical_error("SSC system matrix is not positive definite");
  };
  factor();

  Matrix c = Matrix::Zero(n, n);
  Matrix z(n, n);
  Matrix dual = Matrix::Zero(n, n);
  Eigen::RowVectorXd dual_affine = Eigen::RowVectorXd::Zero(n);

  SscSolution sol;
  sol.lambda = lambda;
  Matrix best;
  double best_objective = kInf;
  for (int it = 0; it < params.max_iter; ++it) {
    Matrix rhs = 2.0 * lambda * gram + rho * c - dual;
    rhs.array() += rho;
    rhs.rowwise() -= dual_affine;
    z = llt.solve(rhs);
    const Matrix c_prev = c;
    const Matrix v = z + dual / rho;
    c = (v.array().abs() - 1.0 / rho).max(0.0) * v.array().sign();
    c.diagonal().setZero();
    const Matrix gap = z - c;
    const Eigen::RowVectorXd affine_gap = z.colwise().sum().array() - 1.0;
    dual += rho * gap;
    dual_affine += rho * affine_gap;
    sol.primal_residual = std::max(gap.cwiseAbs().maxCoeff(), affine_gap.cwiseAbs().maxCoeff());
    sol.dual_residual = rho * (c - c_prev).cwiseAbs().maxCoeff();
    sol.iterations = it + 1;
    Matrix feasible = c;
    detail::project_affine(feasible);
    const double obj = ssc_objective(x, feasible, lambda);
    sol.objective_trace.push_back(obj);
    if (obj < best_objective) {
      best_objective = obj;
      best = std::move(feasible);
    }
    if (sol.primal_residual <= params.tol && sol.dual_residual <= params.tol) {
      sol.converged = true;
      break;
    }
    if (params.adapt_rho && (it + 1) % 10 == 0) {
      if (sol.primal_residual > 10.0 * sol.dual_residual) {
        rho *= 2.0;
        factor();
      } else if (sol.dual_residual > 10.0 * sol.primal_residual) {
        rho /= 2.0;
        factor();
      }
    }
  }
  // Without convergence the best feasible iterate is returned and
  // `converged` stays false.
  if (sol.converged || best.size() == 0) {
    detail::project_affine(c);
    best = std::move(c);
  }
  sol.objective = ssc_objective(x, best, lambda);
  sol.coefficients = std::move(best);
  return sol;
}

/// SSC coefficients, symmetrized affinity |W| + |W|^T, then spectral clustering.
inline ClusterAssignment ssc_cluster(const Matrix& data, int k, double lambda, std::uint64_t seed,
                                     const AdmmParams& params = {}) {
  require(k >= 1 && k <= data.cols(), "SSC clustering needs 1 <= K <= N");
  return detail::with_canonical_order(data, [&](const Matrix& x) {
    if (k == 1) return ClusterAssignment{Labels(static_cast<std::size_t>(x.cols()), 0), 1, {}};
    const SscSolution sol = ssc_solve(x, lambda, params);
    return spectral_cluster(Affinity::from_coefficients(sol.coefficients), k, seed);
  });
}

// ---------------------------------------------------------------------------
// Subspace fitting and assignment.

/// Centroid = sample mean; basis = top `dim` left singular vectors of the
/// centered points. dim may exceed the number of points (extra directions are
/// an arbitrary orthonormal completion).
inline SubspaceModel fit_subspace(const Matrix& points, Index dim) {
  require(points.cols() >= 1, "cannot fit a subspace to zero points");
  require(dim >= 0 && dim <= points.rows(), "subspace dim must lie in [0, D]");
  SubspaceModel m;
  m.centroid = points.rowwise().mean();
  if (dim == 0) {
    m.basis = Matrix(points.rows(), 0);
    return m;
  }
  const Matrix centered = points.colwise() - m.centroid;
  if (dim <= std::min(points.rows(), points.cols())) {
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
    m.basis = svd.matrixU().leftCols(dim);
  } else {
    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeFullU);
    m.basis = svd.matrixU().leftCols(dim);
  }
  return m;
}

struct ClosestSubspace {
  Index index = 0;
  double residual_sq = 0.0;
};

/// argmin_k ||(x - m_k) - U_k U_k^T (x - m_k)||^2; ties go to the smallest index.
inline ClosestSubspace assign_closest_subspace(const Eigen::Ref<const Vector>& x,
                                               const std::vector<SubspaceModel>& models) {
  require(!models.empty(), "need at least one subspace model");
  ClosestSubspace best{0, kInf};
  for (std::size_t k = 0; k < models.size(); ++k) {
    require(models[k].ambient_dim() == x.size(), "subspace model dimension mismatch");
    const double r = models[k].residual_sq(x);
    if (r < best.residual_sq) best = {static_cast<Index>(k), r};
  }
  return best;
}

struct KSubspacesResult {
  ClusterAssignment assignment;
  std::vector<SubspaceModel> models;
  double objective = 0.0;
  std::vector<double> objective_trace;  // sum of squared residuals after each fit
  int iterations = 0;
};

namespace detail {

inline KSubspacesResult k_subspaces_once(const Matrix& x, int k, const std::vector<Index>& dims, std::uint64_t seed,
                                         int max_iter) {
  const Index n = x.cols();
  const auto dim_of = [&](int j) { return dims.size() == 1 ? dims[0] : dims[static_cast<std::size_t>(j)]; };
  Rng rng(seed);
  Labels labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k)));

  KSubspacesResult res;
  std::vector<SubspaceModel> models(static_cast<std::size_t>(k));
  Eigen::ArrayXd resid = Eigen::ArrayXd::Constant(n, kInf);

  auto repair_empty = [&]() {
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) continue;
      Index worst = -1;
      for (Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] < 2) continue;
        if (worst < 0 || resid(i) > resid(worst)) worst = i;
      }
      if (worst < 0) break;
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(worst)])];
      labels[static_cast<std::size_t>(worst)] = j;
      counts[static_cast<std::size_t>(j)] = 1;
      resid(worst) = 0.0;
    }
  };
  repair_empty();

  for (int it = 0; it < std::max(1, max_iter); ++it) {
    for (int j = 0; j < k; ++j) {
      std::vector<Index> members;
      for (Index i = 0; i < n; ++i)
        if (labels[static_cast<std::size_t>(i)] == j) members.push_back(i);
      models[static_cast<std::size_t>(j)] = fit_subspace(select_columns(x, members), dim_of(j));
    }
    double obj = 0.0;
    for (Index i = 0; i < n; ++i) {
      resid(i) = models[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].residual_sq(x.col(i));
      obj += resid(i);
    }
    res.objective_trace.push_back(obj);
    res.iterations = it + 1;

    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      const auto c = assign_closest_subspace(x.col(i), models);
      // Keep the current label on exact ties so the objective cannot rise.
      const int cur = labels[static_cast<std::size_t>(i)];
      if (c.residual_sq < resid(i)) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(c.index);
        resid(i) = c.residual_sq;
        changed = changed || c.index != cur;
      }
    }
    repair_empty();
    if (!changed) break;
  }
  res.objective = res.objective_trace.back();
  res.models = std::move(models);
  res.assignment = {std::move(labels), k, {}};
  return res;
}

}  // namespace detail

/// Alternates closest-subspace assignment and per-cluster PCA fits from a
/// random initial assignment until the assignment stops changing. With
/// several restarts the run with the smallest objective is kept.
inline KSubspacesResult k_subspaces(const Matrix& data, int k, const std::vector<Index>& dims, std::uint64_t seed,
                                    int max_iter = 100, int restarts = 1) {
  require(k >= 1 && k <= data.cols(), "K-subspaces needs 1 <= K <= N");
  require(dims.size() == 1 || dims.size() == static_cast<std::size_t>(k), "dims must have length 1 or K");
  require(restarts >= 1, "K-subspaces needs at least one restart");
  const auto order = canonical_order(data);
  const Matrix x = select_columns(data, order);
  std::optional<KSubspacesResult> best;
  for (int r = 0; r < restarts; ++r) {
    KSubspacesResult res = detail::k_subspaces_once(x, k, dims, derive_seed(seed, 31, static_cast<std::uint64_t>(r)), max_iter);
    if (!best || res.objective < best->objective) best = std::move(res);
  }
  KSubspacesResult out = std::move(*best);
  Labels labels(out.assignment.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) labels[static_cast<std::size_t>(order[i])] = out.assignment.labels[i];
  out.assignment.labels = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------
// Clustering a sketch and extending the labels to the remaining data.

enum class OutOfSamplePolicy {
  automatic,           // closest subspace when dims are known, otherwise residual regression
  closest_subspace,
  residual_regression,
};

/// Clusters fitted on a sketch: member points plus one subspace model each.
struct FittedClusters {
  std::vector<Matrix> members;
  std::vector<SubspaceModel> models;  // empty unless dims were given
};

/// dims: empty (no models), one value for every cluster, or one per cluster
/// matched to clusters by size rank (largest cluster gets the largest dim).
/// A cluster of m points gets at most dimension m - 1.
inline FittedClusters fit_clusters(const Matrix& sketch, const Labels& labels, int k, const std::vector<Index>& dims) {
  require(static_cast<Index>(labels.size()) == sketch.cols(), "labels and sketch differ in size");
  FittedClusters fc;
  std::vector<std::vector<Index>> idx(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) idx[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  for (const auto& ids : idx) fc.members.push_back(select_columns(sketch, ids));
  if (dims.empty()) return fc;
  require(dims.size() == 1 || dims.size() == static_cast<std::size_t>(k), "dims must have length 0, 1 or K");

  std::vector<Index> assigned(static_cast<std::size_t>(k), dims.front());
  if (dims.size() > 1) {
    std::vector<int> by_size(static_cast<std::size_t>(k));
    std::iota(by_size.begin(), by_size.end(), 0);
    std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
      return idx[static_cast<std::size_t>(a)].size() > idx[static_cast<std::size_t>(b)].size();
    });
    std::vector<Index> sorted_dims = dims;
    std::stable_sort(sorted_dims.begin(), sorted_dims.end(), std::greater<>());
    for (std::size_t r = 0; r < by_size.size(); ++r) assigned[static_cast<std::size_t>(by_size[r])] = sorted_dims[r];
  }
  for (int j = 0; j < k; ++j) {
    const Matrix& pts = fc.members[static_cast<std::size_t>(j)];
    if (pts.cols() == 0) {
      // An empty cluster never wins an assignment.
      SubspaceModel m;
      m.basis = Matrix(sketch.rows(), 0);
      m.centroid = Vector::Constant(sketch.rows(), kInf);
      fc.models.push_back(std::move(m));
      continue;
    }
    const Index d = std::min({assigned[static_cast<std::size_t>(j)], pts.cols() - 1, sketch.rows()});
    fc.models.push_back(fit_subspace(pts, d));
  }
  return fc;
}

/// Assigns x to a fitted cluster. Residual regression fits x by ridge least
/// squares (ridge 1e-8, relative to the mean squared norm) on each cluster's
/// members and picks the smallest residual.
inline Index out_of_sample(const Eigen::Ref<const Vector>& x, const FittedClusters& fitted,
                           OutOfSamplePolicy policy = OutOfSamplePolicy::automatic) {
  if (policy == OutOfSamplePolicy::automatic)
    policy = fitted.models.empty() ? OutOfSamplePolicy::residual_regression : OutOfSamplePolicy::closest_subspace;
  if (policy == OutOfSamplePolicy::closest_subspace) {
    require(!fitted.models.empty(), "closest-subspace assignment needs subspace dims");
    const auto c = assign_closest_subspace(x, fitted.models);
    return std::isfinite(c.residual_sq) ? c.index : 0;
  }
  Index best = 0;
  double best_r = kInf;
  for (std::size_t k = 0; k < fitted.members.size(); ++k) {
    const Matrix& a = fitted.members[k];
    if (a.cols() == 0) continue;
    Matrix g = a.transpose() * a;
    const double ridge = 1e-8 * std::max(g.diagonal().mean(), 1e-300);
    g.diagonal().array() += ridge;
    const Vector coef = g.llt().solve(a.transpose() * x);
    const double r = (x - a * coef).squaredNorm();
    if (r < best_r) {
      best_r = r;
      best = static_cast<Index>(k);
    }
  }
  return best;
}

enum class Backend { ssc, kmeans, k_subspaces };

struct SketchClusteringParams {
  int clusters = 2;
  Backend backend = Backend::ssc;
  double lambda = 0.0;               // SSC only
  AdmmParams admm;
  std::vector<Index> dims;           // subspace dims (k_subspaces needs them)
  OutOfSamplePolicy policy = OutOfSamplePolicy::automatic;
  std::uint64_t seed = 0;
  int max_iter = 300;
};

/// Clusters the columns listed in `sketch` with the chosen backend and labels
/// every other column by out-of-sample assignment.
inline ClusterAssignment cluster_from_sketch(const Matrix& data, const std::vector<Index>& sketch,
                                             const SketchClusteringParams& p) {
  require(!sketch.empty(), "sketch is empty");
  const int k = p.clusters;
  require(k >= 1 && k <= static_cast<int>(sketch.size()), "need 1 <= K <= sketch size");
  const Matrix xs = select_columns(data, sketch);
  Labels sketch_labels;
  std::vector<Index> dims = p.dims;
  switch (p.backend) {
    case Backend::ssc:
      require(p.lambda > 0.0, "SSC backend needs lambda > 0");
      sketch_labels = ssc_cluster(xs, k, p.lambda, p.seed, p.admm).labels;
      break;
    case Backend::kmeans:
      sketch_labels = kmeans(xs, k, p.seed, p.max_iter).assignment.labels;
      dims = {0};
      break;
    case Backend::k_subspaces:
      require(!dims.empty(), "K-subspaces backend needs dims");
      sketch_labels = k_subspaces(xs, k, dims, p.seed, p.max_iter).assignment.labels;
      break;
  }
  const FittedClusters fitted = fit_clusters(xs, sketch_labels, k, dims);
  Labels labels(static_cast<std::size_t>(data.cols()), -1);
  for (std::size_t i = 0; i < sketch.size(); ++i) labels[static_cast<std::size_t>(sketch[i])] = sketch_labels[i];
  for (Index i = 0; i < data.cols(); ++i)
    if (labels[static_cast<std::size_t>(i)] < 0)
      labels[static_cast<std::size_t>(i)] = static_cast<int>(out_of_sample(data.col(i), fitted, p.policy));
  return {std::move(labels), k, {}};
}

/// The n columns with the smallest seeded datum hashes: a uniform random
/// subset that does not depend on column positions.
inline std::vector<Index> hash_ranked_sample(const Matrix& data, Index n, std::uint64_t seed) {
  require(n >= 1 && n <= data.cols(), "sample size must lie in [1, N]");
  auto order = canonical_order(data, derive_seed(seed, 41));
  order.resize(static_cast<std::size_t>(n));
  std::sort(order.begin(), order.end());
  return order;
}

/// Scalable SSC: one random draw of n columns, SSC on the draw, out-of-sample
/// assignment for the rest.
inline ClusterAssignment sssc_cluster(const Matrix& data, int k, Index n, double lambda, std::uint64_t seed,
                                      const std::vector<Index>& dims = {},
                                      OutOfSamplePolicy policy = OutOfSamplePolicy::automatic,
                                      const AdmmParams& admm = {}) {
  SketchClusteringParams p;
  p.clusters = k;
  p.backend = Backend::ssc;
  p.lambda = lambda;
  p.admm = admm;
  p.dims = dims;
  p.policy = policy;
  p.seed = seed;
  return cluster_from_sketch(data, hash_ranked_sample(data, n, seed), p);
}

}  // namespace skeva
