#pragma once

#include "skeva/common.hpp"
#include "skeva/kde.hpp"
#include "skeva/parallel.hpp"
#include "skeva/subspace.hpp"

#include <optional>

namespace skeva {

enum class Divergence { ise, cs };

/// Non-increasing scoring functions psi(d).
enum class ScoreFunction {
  inverse,       // 1/d, +inf at d = 0
  negative,      // -d
  exp_negative,  // exp(-d)
};

enum class ReferenceCenter {
  sketch_mean,   // f0 centered at the mean of each sketch
  dataset_mean,  // f0 centered at the mean of all data (one O(N) pass)
};

struct SkevaConfig {
  Index n = 0;         // sketch size
  Index n_prime = 0;   // validation size
  int r_max = 50;
  Divergence divergence = Divergence::ise;
  double c_const = 1e-2;
  double h_ratio = 1.0;       // H  = h_ratio      * h^2(C, n)  I
  double h0_ratio = 0.25;     // H0 = h0_ratio     * h^2(C, n)  I
  double hprime_ratio = 1.0;  // H' = hprime_ratio * h^2(C, n') I
  ScoreFunction score = ScoreFunction::inverse;
  std::uint64_t seed = 0;
  double delta0_init = -kInf;
  bool update_threshold = true;
  ReferenceCenter reference = ReferenceCenter::sketch_mean;
  bool fixed_validation = false;
  int threads = 1;
  std::vector<std::uint64_t> draw_seeds;  // overrides the per-draw seeds derived from `seed`

  void validate(Index population) const {
    require(n >= 2, "sketch size n must be at least 2");
    require(n <= n_prime, "validation size n' must be at least n");
    require(n + n_prime <= population, "n + n' must not exceed the number of data");
    require(r_max >= 1, "r_max must be positive");
    require(c_const > 0 && h_ratio > 0 && h0_ratio > 0 && hprime_ratio > 0, "bandwidth constants must be positive");
    require(draw_seeds.empty() || draw_seeds.size() >= static_cast<std::size_t>(r_max),
            "draw_seeds must cover every draw");
  }

  Bandwidth sketch_bandwidth(Index dim) const { return bandwidth_rule(c_const, n, dim).scaled(h_ratio); }
  Bandwidth reference_bandwidth(Index dim) const { return bandwidth_rule(c_const, n, dim).scaled(h0_ratio); }
  Bandwidth validation_bandwidth(Index dim) const { return bandwidth_rule(c_const, n_prime, dim).scaled(hprime_ratio); }
  std::uint64_t draw_seed(int r) const {
    return draw_seeds.empty() ? derive_seed(seed, 101, static_cast<std::uint64_t>(r))
                              : draw_seeds[static_cast<std::size_t>(r - 1)];
  }
};

/// Audit record of one iteration. Validation fields are set iff passed_gate.
struct DrawRecord {
  int r = 0;
  std::vector<Index> sketch;
  double d_sketch_vs_unimodal = 0.0;
  bool passed_gate = false;
  std::vector<Index> validation;
  double d_sketch_vs_validation = 0.0;
  double score = -kInf;
};

inline double apply_score(ScoreFunction psi, double d) {
  switch (psi) {
    case ScoreFunction::inverse: return d > 0.0 ? 1.0 / d : kInf;
    case ScoreFunction::negative: return -d;
    case ScoreFunction::exp_negative: return std::exp(-d);
  }
  return -kInf;
}

inline double divergence_value(Divergence kind, const KdeModel& a, const KdeModel& b) {
  return kind == Divergence::ise ? d_ise_kde_kde(a, b) : d_cs_kde_kde(a, b).value;
}
inline double divergence_value(Divergence kind, const KdeModel& a, const UnimodalRef& r) {
  return kind == Divergence::ise ? d_ise_kde_ref(a, r) : d_cs_kde_ref(a, r).value;
}

/// Per-run sampling state shared by the phases (fixed validation set, dataset mean).
class DrawSampler {
public:
  DrawSampler(const Matrix& data, const SkevaConfig& cfg) : data_(&data), cfg_(&cfg) {
    cfg.validate(data.cols());
    if (cfg.reference == ReferenceCenter::dataset_mean) dataset_mean_ = data.rowwise().mean();
    if (cfg.fixed_validation) {
      Rng rng(derive_seed(cfg.seed, 102));
      fixed_validation_ = sample_without_replacement(data.cols(), cfg.n_prime, rng);
      std::vector<char> used(static_cast<std::size_t>(data.cols()), 0);
      for (Index i : fixed_validation_) used[static_cast<std::size_t>(i)] = 1;
      for (Index i = 0; i < data.cols(); ++i)
        if (!used[static_cast<std::size_t>(i)]) complement_.push_back(i);
    }
  }

  /// Disjoint sketch / validation index sets for draw r (1-based).
  std::pair<std::vector<Index>, std::vector<Index>> indices(int r) const {
    Rng rng(cfg_->draw_seed(r));
    if (cfg_->fixed_validation) {
      auto pos = sample_without_replacement(static_cast<Index>(complement_.size()), cfg_->n, rng);
      for (auto& p : pos) p = complement_[static_cast<std::size_t>(p)];
      return {std::move(pos), fixed_validation_};
    }
    auto all = sample_without_replacement(data_->cols(), cfg_->n + cfg_->n_prime, rng);
    std::vector<Index> validation(all.begin() + cfg_->n, all.end());
    all.resize(static_cast<std::size_t>(cfg_->n));
    return {std::move(all), std::move(validation)};
  }

  const std::optional<Vector>& dataset_mean() const { return dataset_mean_; }

private:
  const Matrix* data_;
  const SkevaConfig* cfg_;
  std::optional<Vector> dataset_mean_;
  std::vector<Index> fixed_validation_;
  std::vector<Index> complement_;
};

/// Output of the sketching phase for one draw.
struct SketchPhase {
  int r = 0;
  std::vector<Index> sketch;
  std::vector<Index> validation;  // drawn alongside, used only if the gate passes
  KdeModel kde;
  UnimodalRef reference;
  double d_unimodal = 0.0;
};

inline SketchPhase sketch_phase(const Matrix& data, const SkevaConfig& cfg, const DrawSampler& sampler, int r) {
  SketchPhase s;
  s.r = r;
  std::tie(s.sketch, s.validation) = sampler.indices(r);
  const Index dim = data.rows();
  s.kde = KdeModel(select_columns(data, s.sketch), cfg.sketch_bandwidth(dim));
  s.reference.center = sampler.dataset_mean() ? *sampler.dataset_mean() : Vector(s.kde.points.rowwise().mean());
  s.reference.bandwidth = cfg.reference_bandwidth(dim);
  s.d_unimodal = divergence_value(cfg.divergence, s.kde, s.reference);
  return s;
}

inline bool passes_gate(double d_unimodal, double delta0) { return d_unimodal >= delta0; }

struct ValidationPhase {
  KdeModel kde;
  double d_validation = 0.0;
  double score = -kInf;
};

inline ValidationPhase validation_phase(const Matrix& data, const SkevaConfig& cfg, const SketchPhase& s) {
  ValidationPhase v;
  v.kde = KdeModel(select_columns(data, s.validation), cfg.validation_bandwidth(data.rows()));
  v.d_validation = divergence_value(cfg.divergence, s.kde, v.kde);
  v.score = apply_score(cfg.score, v.d_validation);
  return v;
}

/// Threshold Delta0 and best score so far.
struct ThresholdState {
  double delta0 = -kInf;
  double psi_max = -kInf;
};

/// Delta0 <- d(f, f0) when the draw passed the gate and its score is at least
/// the best so far; psi_max tracks the best score.
inline ThresholdState update_threshold(ThresholdState state, double d_unimodal, double score) {
  if (d_unimodal >= state.delta0 && score >= state.psi_max) state.delta0 = d_unimodal;
  state.psi_max = std::max(state.psi_max, score);
  return state;
}

struct SkevaResult {
  ClusterAssignment assignment;
  std::vector<DrawRecord> draws;
  int r_star = 0;  // 1-based winning iteration
  int gated = 0;
  std::vector<Index> winner_sketch;
  std::vector<double> delta0_trace;
};

/// Adaptive stopping trace: R_hat^{(r)} and the running averages behind it.
struct AdaptiveTrace {
  std::vector<double> r_hat;
  std::vector<double> rho_bar;
  std::vector<double> mean_ise_sketch_ref;   // running mean of d_ISE(f_hat, f0)
  std::vector<double> mean_dist_val_sketch;  // running mean of sqrt d_ISE(f_tilde, f_hat)
  std::vector<double> mean_dist_val_ref;     // running mean of sqrt d_ISE(f_tilde, f0)
  std::vector<double> delta0_bar;
};

struct AdaptiveParams {
  double p = 0.99;
  double q = 0.01;
  double r0 = 3.0;
  bool stop_on_bound = true;
  int hard_cap = 100000;
};

struct SkevaAdaptiveResult {
  SkevaResult run;
  AdaptiveTrace trace;
};

namespace detail {

inline void require_gated(int gated) {
  if (gated == 0)
    throw numerical_error("no draw passed the unimodality gate; lower delta0 or raise r_max");
}

inline SkevaResult finish(const Matrix& data, SkevaResult res, const SketchClusteringParams& backend) {
  require_gated(res.gated);
  double best = -kInf;
  for (const auto& d : res.draws) {
    if (d.passed_gate && (d.score > best || res.r_star == 0)) {
      best = d.score;
      res.r_star = d.r;
      res.winner_sketch = d.sketch;
    }
  }
  res.assignment = cluster_from_sketch(data, res.winner_sketch, backend);
  return res;
}

}  // namespace detail

/// Fixed-R_max sketch-and-validate loop followed by clustering of the winning
/// sketch. Sketch and validation KDEs are computed on `cfg.threads` workers;
/// the threshold logic is replayed in draw order, so results do not depend on
/// the thread count.
inline SkevaResult run_skeva(const Matrix& data, const SkevaConfig& cfg, const SketchClusteringParams& backend) {
  const DrawSampler sampler(data, cfg);
  const auto r_max = static_cast<std::size_t>(cfg.r_max);

  std::vector<SketchPhase> sketches(r_max);
  parallel_for(r_max, cfg.threads, [&](std::size_t i) {
    sketches[i] = sketch_phase(data, cfg, sampler, static_cast<int>(i) + 1);
  });

  // Draws that can pass the gate under any threshold history.
  std::vector<char> candidate(r_max, 0);
  double floor = cfg.delta0_init;
  bool seen_first = false;
  for (std::size_t i = 0; i < r_max; ++i) {
    if (!passes_gate(sketches[i].d_unimodal, floor)) continue;
    candidate[i] = 1;
    if (cfg.update_threshold && !seen_first) {
      floor = std::max(floor, sketches[i].d_unimodal);
      seen_first = true;
    }
  }
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < r_max; ++i)
    if (candidate[i]) todo.push_back(i);
  std::vector<std::optional<ValidationPhase>> validations(r_max);
  parallel_for(todo.size(), cfg.threads, [&](std::size_t j) {
    validations[todo[j]] = validation_phase(data, cfg, sketches[todo[j]]);
  });

  SkevaResult res;
  ThresholdState state{cfg.delta0_init, -kInf};
  for (std::size_t i = 0; i < r_max; ++i) {
    const SketchPhase& s = sketches[i];
    DrawRecord rec;
    rec.r = s.r;
    rec.sketch = s.sketch;
    rec.d_sketch_vs_unimodal = s.d_unimodal;
    rec.passed_gate = passes_gate(s.d_unimodal, state.delta0);
    if (rec.passed_gate) {
      const ValidationPhase& v = *validations[i];
      rec.validation = s.validation;
      rec.d_sketch_vs_validation = v.d_validation;
      rec.score = v.score;
      ++res.gated;
      if (cfg.update_threshold) state = update_threshold(state, s.d_unimodal, v.score);
    }
    res.delta0_trace.push_back(state.delta0);
    const bool unbeatable = rec.passed_gate && rec.score == kInf;
    res.draws.push_back(std::move(rec));
    if (unbeatable) break;
  }
  return detail::finish(data, std::move(res), backend);
}

/// Sequential loop whose length is set on the fly: after each draw the
/// running averages give rho_bar^{(r)}, R_hat^{(r)} = max(rho_bar, R0), and
/// the loop stops once r >= R_hat (or at hard_cap). The averages use
/// d = sqrt(d_ISE) regardless of the divergence chosen for scoring; the
/// validation KDE is built on every draw so the averages run over all r.
inline SkevaAdaptiveResult run_skeva_adaptive(const Matrix& data, const SkevaConfig& cfg,
                                              const SketchClusteringParams& backend, const AdaptiveParams& ap) {
  require(ap.p > 0 && ap.p < 1 && ap.q > 0 && ap.q < 1, "p and q must lie in (0,1)");
  require(ap.r0 >= 1, "R0 must be at least 1");
  require(ap.hard_cap >= 1, "hard_cap must be positive");
  SkevaConfig run_cfg = cfg;
  run_cfg.r_max = ap.hard_cap;
  if (!cfg.draw_seeds.empty()) run_cfg.r_max = std::min<int>(ap.hard_cap, static_cast<int>(cfg.draw_seeds.size()));
  const DrawSampler sampler(data, run_cfg);
  const Index dim = data.rows();
  const double h = run_cfg.sketch_bandwidth(dim).h();
  const double concentration = std::sqrt(-2.0 * std::log(ap.q / 2.0) /
                                         (static_cast<double>(run_cfg.n) * h *
                                          std::pow(4.0 * kPi, 0.5 * static_cast<double>(dim))));

  SkevaAdaptiveResult out;
  SkevaResult& res = out.run;
  ThresholdState state{cfg.delta0_init, -kInf};
  double mean_ref = 0.0, mean_vs = 0.0, mean_vr = 0.0;
  for (int r = 1; r <= run_cfg.r_max; ++r) {
    const SketchPhase s = sketch_phase(data, run_cfg, sampler, r);
    const ValidationPhase v = validation_phase(data, run_cfg, s);

    const double w_old = static_cast<double>(r - 1) / r, w_new = 1.0 / r;
    mean_ref = w_old * mean_ref + w_new * d_ise_kde_ref(s.kde, s.reference);
    mean_vs = w_old * mean_vs + w_new * std::sqrt(d_ise_kde_kde(v.kde, s.kde));
    mean_vr = w_old * mean_vr + w_new * std::sqrt(d_ise_kde_ref(v.kde, s.reference));
    const double delta0_bar = std::pow(concentration + mean_vs + mean_vr, 2);
    const double ratio = mean_ref / delta0_bar;
    const double rho_bar = (ratio < 1.0) ? std::log(1.0 - ap.p) / std::log1p(-ratio) : ap.r0;
    const double r_hat = std::max(rho_bar, ap.r0);
    out.trace.mean_ise_sketch_ref.push_back(mean_ref);
    out.trace.mean_dist_val_sketch.push_back(mean_vs);
    out.trace.mean_dist_val_ref.push_back(mean_vr);
    out.trace.delta0_bar.push_back(delta0_bar);
    out.trace.rho_bar.push_back(rho_bar);
    out.trace.r_hat.push_back(r_hat);

    DrawRecord rec;
    rec.r = r;
    rec.sketch = s.sketch;
    rec.d_sketch_vs_unimodal = s.d_unimodal;
    rec.passed_gate = passes_gate(s.d_unimodal, state.delta0);
    if (rec.passed_gate) {
      rec.validation = s.validation;
      rec.d_sketch_vs_validation = v.d_validation;
      rec.score = v.score;
      ++res.gated;
      if (cfg.update_threshold) state = update_threshold(state, s.d_unimodal, v.score);
    }
    res.delta0_trace.push_back(state.delta0);
    const bool unbeatable = rec.passed_gate && rec.score == kInf;
    res.draws.push_back(std::move(rec));
    if (unbeatable) break;
    if (ap.stop_on_bound && static_cast<double>(r) >= r_hat) break;
  }
  res = detail::finish(data, std::move(res), backend);
  return out;
}

}  // namespace skeva
