#pragma once

#include "skeva/common.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

namespace skeva {

/// D x N real matrix of observations; column i is datum x_i.
class DataMatrix {
public:
  DataMatrix() = default;
  explicit DataMatrix(Matrix values) : values_(std::move(values)) { validate(); }

  Index dim() const { return values_.rows(); }
  Index size() const { return values_.cols(); }
  const Matrix& matrix() const { return values_; }
  operator const Matrix&() const { return values_; }  // NOLINT: views as Eigen
  auto col(Index i) const { return values_.col(i); }

private:
  void validate() const {
    require(values_.rows() >= 1 && values_.cols() >= 1, "data matrix must be at least 1x1");
    require(values_.allFinite(), "data matrix has non-finite entries");
  }
  Matrix values_;
};

/// Affine subspace x = basis * y + centroid. basis has orthonormal columns.
struct SubspaceModel {
  Matrix basis;     // D x d
  Vector centroid;  // D

  Index dim() const { return basis.cols(); }
  Index ambient_dim() const { return centroid.size(); }

  /// Squared distance of x from the subspace, projecting the centered vector.
  double residual_sq(const Eigen::Ref<const Vector>& x) const {
    const Vector c = x - centroid;
    if (basis.cols() == 0) return c.squaredNorm();
    return (c - basis * (basis.transpose() * c)).squaredNorm();
  }
  Vector coordinates(const Eigen::Ref<const Vector>& x) const {
    return basis.transpose() * (x - centroid);
  }
};

struct LabeledDataset {
  DataMatrix data;
  Labels labels;
  int clusters = 0;
};

/// Gaussian mixture: weights w_l, means mu_l, covariances Sigma_l.
struct GmmModel {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  Index components() const { return weights.size(); }
  Index dim() const { return means.empty() ? 0 : means.front().size(); }

  Vector mean() const {
    Vector mu = Vector::Zero(dim());
    for (Index l = 0; l < components(); ++l) mu += weights(l) * means[static_cast<std::size_t>(l)];
    return mu;
  }

  void validate() const {
    const auto l = static_cast<std::size_t>(weights.size());
    require(l >= 1, "GMM needs at least one component");
    require(means.size() == l && covariances.size() == l, "GMM component arrays differ in length");
    require((weights.array() >= 0.0).all(), "GMM weights must be nonnegative");
    require(std::abs(weights.sum() - 1.0) <= 1e-12, "GMM weights must sum to 1");
    const Index d = means.front().size();
    require(d >= 1, "GMM dimension must be positive");
    for (std::size_t i = 0; i < l; ++i) {
      require(means[i].size() == d, "GMM means differ in dimension");
      const Matrix& s = covariances[i];
      require(s.rows() == d && s.cols() == d, "GMM covariance has wrong shape");
      require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()),
              "GMM covariance must be symmetric");
      Eigen::LLT<Matrix> llt(s);
      require(llt.info() == Eigen::Success, "GMM covariance must be positive definite");
    }
  }

  /// One-dimensional mixture from scalar means and variances.
  static GmmModel univariate(const std::vector<double>& weights, const std::vector<double>& means,
                             const std::vector<double>& variances) {
    GmmModel g;
    g.weights = Eigen::Map<const Vector>(weights.data(), static_cast<Index>(weights.size()));
    for (std::size_t i = 0; i < means.size(); ++i) {
      g.means.push_back(Vector::Constant(1, means[i]));
      g.covariances.push_back(Matrix::Constant(1, 1, variances[i]));
    }
    g.validate();
    return g;
  }
};

/// Smallest principal angle between span(a) and span(b); both orthonormal.
inline double principal_angle(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0 || b.cols() == 0) return kPi / 2;
  const Matrix m = a.transpose() * b;
  Eigen::JacobiSVD<Matrix> svd(m);
  const double top = std::clamp(svd.singularValues()(0), 0.0, 1.0);
  return std::acos(top);
}

/// Orthonormal basis of a random d-dimensional subspace of R^D (Gaussian + QR).
inline Matrix random_orthonormal_basis(Index ambient_dim, Index dim, Rng& rng) {
  Matrix g(ambient_dim, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < ambient_dim; ++i) g(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(ambient_dim, dim);
  // Fix column signs so Q does not depend on the Householder convention.
  const Matrix r = qr.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

struct SubspaceDatasetParams {
  Index ambient_dim = 0;
  std::vector<Index> subspace_dims;
  std::vector<Index> points_per_subspace;
  double noise_var = 0.0;
  double min_angle = 0.0;
  double centroid_offset = 0.0;  // 0 => linear subspaces
  std::uint64_t seed = 0;
  int max_attempts = 10000;
};

struct SubspaceDataset {
  LabeledDataset dataset;
  std::vector<SubspaceModel> subspaces;
};

/// Union-of-subspaces data: x = U_k y + m_k + v with y ~ U[-1,1]^{d_k} and
/// v ~ N(0, noise_var I). Bases are redrawn until every pair is at least
/// `min_angle` apart; throws numerical_error when the attempt cap is hit.
inline SubspaceDataset generate_subspace_dataset(const SubspaceDatasetParams& p) {
  const std::size_t k = p.subspace_dims.size();
  require(k >= 1, "need at least one subspace");
  require(p.points_per_subspace.size() == k, "subspace_dims and points_per_subspace differ in length");
  require(p.ambient_dim >= 1, "ambient_dim must be positive");
  require(p.noise_var >= 0.0, "noise_var must be nonnegative");
  require(p.min_angle >= 0.0 && p.min_angle <= kPi / 2 + 1e-15, "min_angle must lie in [0, pi/2]");
  require(p.centroid_offset >= 0.0, "centroid_offset must be nonnegative");
  for (std::size_t i = 0; i < k; ++i) {
    require(p.subspace_dims[i] >= 0 && p.subspace_dims[i] <= p.ambient_dim, "subspace dim exceeds ambient_dim");
    require(p.points_per_subspace[i] >= 1, "each subspace needs at least one point");
  }

  Rng basis_rng(derive_seed(p.seed, 1));
  std::vector<SubspaceModel> models;
  int attempts = 0;
  while (models.size() < k) {
    const Index d = p.subspace_dims[models.size()];
    Matrix basis = random_orthonormal_basis(p.ambient_dim, d, basis_rng);
    bool ok = true;
    for (const auto& m : models) {
      if (principal_angle(m.basis, basis) < p.min_angle) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (++attempts >= p.max_attempts)
        throw numerical_error("subspace angle constraint infeasible after " + std::to_string(attempts) + " attempts");
      continue;
    }
    SubspaceModel m;
    m.basis = std::move(basis);
    m.centroid = Vector::Zero(p.ambient_dim);
    if (p.centroid_offset > 0.0) {
      Vector dir(p.ambient_dim);
      for (Index i = 0; i < p.ambient_dim; ++i) dir(i) = standard_normal(basis_rng);
      m.centroid = p.centroid_offset * dir.normalized();
    }
    models.push_back(std::move(m));
  }

  Index total = 0;
  for (Index c : p.points_per_subspace) total += c;
  Matrix x(p.ambient_dim, total);
  Labels labels;
  labels.reserve(static_cast<std::size_t>(total));
  Rng point_rng(derive_seed(p.seed, 2));
  const double sigma = std::sqrt(p.noise_var);
  Index col = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const SubspaceModel& m = models[c];
    for (Index i = 0; i < p.points_per_subspace[c]; ++i, ++col) {
      Vector y(m.dim());
      for (Index j = 0; j < m.dim(); ++j) y(j) = 2.0 * uniform01(point_rng) - 1.0;
      Vector v = m.basis * y + m.centroid;
      if (sigma > 0.0)
        for (Index r = 0; r < p.ambient_dim; ++r) v(r) += sigma * standard_normal(point_rng);
      x.col(col) = v;
      labels.push_back(static_cast<int>(c));
    }
  }
  return {LabeledDataset{DataMatrix(std::move(x)), std::move(labels), static_cast<int>(k)}, std::move(models)};
}

/// i.i.d. draws from a Gaussian mixture; component ids are returned in `components` if given.
inline DataMatrix sample_gmm(const GmmModel& model, Index count, std::uint64_t seed,
                             Labels* components = nullptr) {
  model.validate();
  require(count >= 1, "sample count must be positive");
  const Index d = model.dim();
  std::vector<Matrix> chol;
  for (const auto& s : model.covariances) chol.push_back(Eigen::LLT<Matrix>(s).matrixL());
  std::vector<double> cumulative;
  double acc = 0.0;
  Index last_positive = 0;
  for (Index l = 0; l < model.components(); ++l) {
    acc += model.weights(l);
    cumulative.push_back(acc);
    if (model.weights(l) > 0) last_positive = l;
  }
  Rng rng(derive_seed(seed, 3));
  Matrix out(d, count);
  if (components) components->assign(static_cast<std::size_t>(count), 0);
  Vector z(d);
  for (Index i = 0; i < count; ++i) {
    const double u = uniform01(rng);
    Index comp = last_positive;
    for (Index l = 0; l < model.components(); ++l) {
      if (u < cumulative[static_cast<std::size_t>(l)]) {
        comp = l;
        break;
      }
    }
    for (Index j = 0; j < d; ++j) z(j) = standard_normal(rng);
    const auto c = static_cast<std::size_t>(comp);
    out.col(i) = model.means[c] + chol[c] * z;
    if (components) (*components)[static_cast<std::size_t>(i)] = static_cast<int>(comp);
  }
  return DataMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// CSV: one datum per row, comma separated.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline double parse_double(std::string_view cell, std::size_t line_no) {
  double v = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw config_error("non-numeric cell '" + std::string(cell) + "' on line " + std::to_string(line_no));
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads rows of numbers into a D x N matrix (N = row count).
inline DataMatrix read_csv(std::istream& in, bool has_header = false) {
  std::vector<double> values;
  std::size_t width = 0, rows = 0, line_no = 0;
  std::string line;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto cells = detail::split_commas(body);
    if (rows == 0) width = cells.size();
    if (cells.size() != width)
      throw config_error("ragged CSV: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                         " cells, expected " + std::to_string(width));
    for (auto c : cells) values.push_back(detail::parse_double(c, line_no));
    ++rows;
  }
  if (rows == 0) throw config_error("CSV contains no data rows");
  Matrix m = Eigen::Map<Matrix>(values.data(), static_cast<Index>(width), static_cast<Index>(rows));
  return DataMatrix(std::move(m));
}

inline DataMatrix load_csv(const std::string& path, bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  return read_csv(in, has_header);
}

/// Writes shortest round-trip representations, so load(save(x)) == x exactly.
inline void write_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.cols(); ++i) {
    for (Index r = 0; r < m.rows(); ++r) {
      if (r) out << ',';
      out << detail::format_double(m(r, i));
    }
    out << '\n';
  }
}

inline void save_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  write_csv(out, m);
}

inline Labels load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const double v = detail::parse_double(body, line_no);
    if (v < 0 || v != std::floor(v)) throw config_error("label on line " + std::to_string(line_no) + " is not a nonnegative integer");
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

inline void save_labels(const Labels& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  for (int l : labels) out << l << '\n';
}

// ---------------------------------------------------------------------------

struct PcaResult {
  DataMatrix scores;        // target_dim x N
  Matrix basis;             // D x target_dim, orthonormal
  Vector mean;              // D
  Vector singular_values;   // all singular values of the centered data
};

/// Principal-component scores of the mean-centered data via thin SVD. Each
/// component's sign makes the largest-magnitude entry of its right singular
/// vector positive.
inline PcaResult pca_reduce(const Matrix& data, Index target_dim) {
  require(target_dim >= 1 && target_dim <= std::min(data.rows(), data.cols()),
          "target_dim must lie in [1, min(D, N)]");
  PcaResult out;
  out.mean = data.rowwise().mean();
  const Matrix centered = data.colwise() - out.mean;
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix u = svd.matrixU().leftCols(target_dim);
  const Matrix v = svd.matrixV().leftCols(target_dim);
  for (Index j = 0; j < target_dim; ++j) {
    Index arg = 0;
    v.col(j).cwiseAbs().maxCoeff(&arg);
    if (v(arg, j) < 0) u.col(j) *= -1.0;
  }
  out.singular_values = svd.singularValues();
  out.scores = DataMatrix(u.transpose() * centered);
  out.basis = std::move(u);
  return out;
}

}  // namespace skeva
