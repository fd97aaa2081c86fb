#include "skeva/bounds.hpp"
#include "skeva/data.hpp"
#include "skeva/metrics.hpp"
#include "skeva/skeva.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

using namespace skeva;

namespace {

GmmModel three_mode() {
  return GmmModel::univariate({100.0 / 480, 180.0 / 480, 200.0 / 480}, {0.0, 0.5, 1.0}, {0.3, 0.3, 0.3});
}

const Matrix& three_mode_data() {
  static const Matrix data = sample_gmm(three_mode(), 480, 1).matrix();
  return data;
}

SkevaConfig small_config(std::uint64_t seed = 3) {
  SkevaConfig cfg;
  cfg.n = 10;
  cfg.n_prime = 50;
  cfg.r_max = 40;
  cfg.seed = seed;
  return cfg;
}

SketchClusteringParams kmeans_backend(int k = 3) {
  SketchClusteringParams p;
  p.clusters = k;
  p.backend = Backend::kmeans;
  p.seed = 5;
  return p;
}

void expect_same_records(const std::vector<DrawRecord>& a, const std::vector<DrawRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].r, b[i].r);
    EXPECT_EQ(a[i].sketch, b[i].sketch);
    EXPECT_EQ(a[i].validation, b[i].validation);
    EXPECT_EQ(a[i].passed_gate, b[i].passed_gate);
    EXPECT_EQ(a[i].d_sketch_vs_unimodal, b[i].d_sketch_vs_unimodal);
    EXPECT_EQ(a[i].d_sketch_vs_validation, b[i].d_sketch_vs_validation);
    EXPECT_EQ(a[i].score, b[i].score);
  }
}

double median_time(const std::function<void()>& fn, int reps) {
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) t.push_back(timed(fn));
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(SkevaConfig, ValidatesSizes) {
  SkevaConfig cfg = small_config();
  EXPECT_NO_THROW(cfg.validate(60));
  EXPECT_THROW(cfg.validate(59), config_error);
  cfg.n = 1;
  EXPECT_THROW(cfg.validate(480), config_error);
  cfg.n = 60;
  EXPECT_THROW(cfg.validate(480), config_error);
  cfg = small_config();
  cfg.r_max = 0;
  EXPECT_THROW(cfg.validate(480), config_error);
  cfg = small_config();
  cfg.draw_seeds = {1, 2};
  EXPECT_THROW(cfg.validate(480), config_error);
}

TEST(SkevaConfig, DefaultBandwidths) {
  const SkevaConfig cfg = small_config();
  const Bandwidth h = bandwidth_rule(1e-2, 10, 1);
  EXPECT_DOUBLE_EQ(cfg.sketch_bandwidth(1).scale(), h.scale());
  EXPECT_DOUBLE_EQ(cfg.reference_bandwidth(1).scale(), h.scale() / 4.0);
  EXPECT_DOUBLE_EQ(cfg.validation_bandwidth(1).scale(), bandwidth_rule(1e-2, 50, 1).scale());
}

// ---------------------------------------------------------------------------
// Phases

TEST(SketchPhase, DisjointDrawsWithoutReplacement) {
  const Matrix& x = three_mode_data();
  for (bool fixed : {false, true}) {
    SkevaConfig cfg = small_config();
    cfg.fixed_validation = fixed;
    const DrawSampler sampler(x, cfg);
    std::vector<Index> first_validation;
    for (int r = 1; r <= 100; ++r) {
      const auto [sketch, validation] = sampler.indices(r);
      ASSERT_EQ(sketch.size(), 10u);
      ASSERT_EQ(validation.size(), 50u);
      std::set<Index> all(sketch.begin(), sketch.end());
      all.insert(validation.begin(), validation.end());
      EXPECT_EQ(all.size(), 60u);
      EXPECT_GE(*all.begin(), 0);
      EXPECT_LT(*all.rbegin(), 480);
      if (r == 1) first_validation = validation;
      if (fixed) EXPECT_EQ(validation, first_validation);
    }
  }
}

TEST(SketchPhase, IdenticalPointsMatchReference) {
  const Matrix x = Matrix::Constant(2, 60, 1.5);
  SkevaConfig cfg = small_config();
  cfg.h0_ratio = 1.0;
  const DrawSampler sampler(x, cfg);
  const SketchPhase s = sketch_phase(x, cfg, sampler, 1);
  EXPECT_NEAR(s.d_unimodal, 0.0, 1e-12);
  EXPECT_FALSE(passes_gate(s.d_unimodal, 1e-6));
  EXPECT_TRUE(passes_gate(s.d_unimodal, -kInf));
}

TEST(SketchPhase, ReferenceCenter) {
  const Matrix& x = three_mode_data();
  SkevaConfig cfg = small_config();
  const DrawSampler a(x, cfg);
  const SketchPhase s = sketch_phase(x, cfg, a, 4);
  EXPECT_NEAR(s.reference.center(0), select_columns(x, s.sketch).mean(), 1e-15);
  cfg.reference = ReferenceCenter::dataset_mean;
  const DrawSampler b(x, cfg);
  const SketchPhase t = sketch_phase(x, cfg, b, 4);
  EXPECT_NEAR(t.reference.center(0), x.mean(), 1e-15);
  EXPECT_EQ(t.sketch, s.sketch);
}

TEST(SketchPhase, GatePassRateReproducible) {
  const Matrix& x = three_mode_data();
  SkevaConfig cfg = small_config();
  cfg.r_max = 1000;
  const auto a = run_skeva(x, cfg, kmeans_backend());
  const auto b = run_skeva(x, cfg, kmeans_backend());
  EXPECT_EQ(a.gated, b.gated);
  expect_same_records(a.draws, b.draws);
  EXPECT_GT(a.gated, 0);
  EXPECT_LT(a.gated, static_cast<int>(a.draws.size()));
}

TEST(ValidationPhase, Scores) {
  EXPECT_EQ(apply_score(ScoreFunction::inverse, 2.0), 0.5);
  EXPECT_EQ(apply_score(ScoreFunction::inverse, 0.0), kInf);
  EXPECT_EQ(apply_score(ScoreFunction::negative, 2.0), -2.0);
  EXPECT_DOUBLE_EQ(apply_score(ScoreFunction::exp_negative, 2.0), std::exp(-2.0));
  for (auto psi : {ScoreFunction::inverse, ScoreFunction::negative, ScoreFunction::exp_negative}) {
    double prev = kInf;
    for (double d : {1e-3, 0.1, 0.5, 1.0, 3.0, 10.0}) {
      const double s = apply_score(psi, d);
      EXPECT_LT(s, prev);
      prev = s;
    }
  }
}

TEST(ValidationPhase, DuplicateDataGivesInfiniteScoreAndStopsEarly) {
  const Matrix x = Matrix::Constant(1, 40, 0.25);
  SkevaConfig cfg = small_config();
  cfg.n_prime = 10;  // same bandwidth for sketch and validation
  cfg.r_max = 20;
  const auto res = run_skeva(x, cfg, kmeans_backend(1));
  ASSERT_EQ(res.draws.size(), 1u);
  EXPECT_EQ(res.draws[0].score, kInf);
  EXPECT_EQ(res.r_star, 1);
}

TEST(UpdateThreshold, FirstPassAndWorseScore) {
  ThresholdState s;
  s = update_threshold(s, 0.7, 2.0);
  EXPECT_EQ(s.delta0, 0.7);
  EXPECT_EQ(s.psi_max, 2.0);
  s = update_threshold(s, 0.9, 1.0);
  EXPECT_EQ(s.delta0, 0.7);
  EXPECT_EQ(s.psi_max, 2.0);
}

TEST(UpdateThreshold, FiveDrawHandSimulation) {
  // (d, score) per draw; gate then update, as in the main loop.
  const std::vector<std::pair<double, double>> draws{{1.0, 2.0}, {0.5, 5.0}, {1.5, 1.0}, {2.0, 3.0}, {2.0, 3.0}};
  const std::vector<double> want_delta0{1.0, 1.0, 1.0, 2.0, 2.0};
  const std::vector<bool> want_gate{true, false, true, true, true};
  const std::vector<double> want_psi{2.0, 2.0, 2.0, 3.0, 3.0};
  ThresholdState s;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const bool gate = passes_gate(draws[i].first, s.delta0);
    EXPECT_EQ(gate, want_gate[i]) << "draw " << i;
    if (gate) s = update_threshold(s, draws[i].first, draws[i].second);
    EXPECT_EQ(s.delta0, want_delta0[i]) << "draw " << i;
    EXPECT_EQ(s.psi_max, want_psi[i]) << "draw " << i;
  }
}

// ---------------------------------------------------------------------------
// Fixed-R_max loop

TEST(RunSkeva, SingleDrawEqualsSketchClustering) {
  SubspaceDatasetParams p;
  p.ambient_dim = 8;
  p.subspace_dims = {2, 2};
  p.points_per_subspace = {60, 60};
  p.noise_var = 1e-4;
  p.min_angle = kPi / 4;
  p.seed = 2;
  const auto ds = generate_subspace_dataset(p);
  SkevaConfig cfg;
  cfg.n = 30;
  cfg.n_prime = 40;
  cfg.r_max = 1;
  cfg.seed = 9;
  SketchClusteringParams backend;
  backend.clusters = 2;
  backend.lambda = 20.0;
  backend.dims = {2};
  backend.seed = 4;
  const auto res = run_skeva(ds.dataset.data, cfg, backend);
  const DrawSampler sampler(ds.dataset.data, cfg);
  const auto sketch = sampler.indices(1).first;
  EXPECT_EQ(res.winner_sketch, sketch);
  EXPECT_EQ(res.assignment.labels, cluster_from_sketch(ds.dataset.data, sketch, backend).labels);
  EXPECT_EQ(res.r_star, 1);
}

TEST(RunSkeva, DeterministicAndThreadIndependent) {
  const Matrix& x = three_mode_data();
  SkevaConfig cfg = small_config(11);
  const auto a = run_skeva(x, cfg, kmeans_backend());
  const auto b = run_skeva(x, cfg, kmeans_backend());
  cfg.threads = 4;
  const auto c = run_skeva(x, cfg, kmeans_backend());
  for (const auto* other : {&b, &c}) {
    expect_same_records(a.draws, other->draws);
    EXPECT_EQ(a.assignment.labels, other->assignment.labels);
    EXPECT_EQ(a.r_star, other->r_star);
    EXPECT_EQ(a.delta0_trace, other->delta0_trace);
  }
}

TEST(RunSkeva, RecordInvariants) {
  const Matrix& x = three_mode_data();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = run_skeva(x, small_config(seed), kmeans_backend());
    double prev_delta = -kInf, psi_max = -kInf, best = -kInf;
    int gated = 0;
    for (std::size_t i = 0; i < res.draws.size(); ++i) {
      const DrawRecord& d = res.draws[i];
      EXPECT_EQ(d.r, static_cast<int>(i) + 1);
      EXPECT_EQ(d.passed_gate, !d.validation.empty());
      if (!d.passed_gate) EXPECT_EQ(d.score, -kInf);
      if (d.passed_gate) {
        ++gated;
        EXPECT_GE(d.d_sketch_vs_unimodal, prev_delta);
        psi_max = std::max(psi_max, d.score);
        if (d.score > best) best = d.score;
      }
      EXPECT_GE(res.delta0_trace[i], prev_delta);
      prev_delta = res.delta0_trace[i];
    }
    EXPECT_EQ(gated, res.gated);
    // The winner has the best score and is the earliest such draw.
    const DrawRecord& w = res.draws[static_cast<std::size_t>(res.r_star - 1)];
    EXPECT_EQ(w.score, best);
    for (int r = 1; r < res.r_star; ++r) EXPECT_LT(res.draws[static_cast<std::size_t>(r - 1)].score, best);
    EXPECT_EQ(res.winner_sketch, w.sketch);
    EXPECT_EQ(res.assignment.labels.size(), 480u);
  }
}

TEST(RunSkeva, NoGatedDrawThrows) {
  SkevaConfig cfg = small_config();
  cfg.delta0_init = 1e300;
  EXPECT_THROW(run_skeva(three_mode_data(), cfg, kmeans_backend()), numerical_error);
}

TEST(RunSkeva, WinnerInvariantToScoreReparameterization) {
  const Matrix& x = three_mode_data();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SkevaConfig cfg = small_config(seed);
    const auto a = run_skeva(x, cfg, kmeans_backend());
    for (auto psi : {ScoreFunction::negative, ScoreFunction::exp_negative}) {
      cfg.score = psi;
      const auto b = run_skeva(x, cfg, kmeans_backend());
      EXPECT_EQ(a.r_star, b.r_star);
      EXPECT_EQ(a.assignment.labels, b.assignment.labels);
      EXPECT_EQ(a.delta0_trace, b.delta0_trace);
    }
  }
}

TEST(RunSkeva, PermutedDrawOrderWithFixedThreshold) {
  // With a fixed threshold the gate of each draw does not depend on the
  // others, so permuting the per-draw seeds permutes the records only.
  const Matrix& x = three_mode_data();
  SkevaConfig cfg = small_config(21);
  cfg.update_threshold = false;
  for (int r = 1; r <= cfg.r_max; ++r) cfg.draw_seeds.push_back(derive_seed(77, static_cast<std::uint64_t>(r)));
  cfg.delta0_init = 0.0;
  const auto a = run_skeva(x, cfg, kmeans_backend());
  Rng rng(4);
  shuffle(cfg.draw_seeds, rng);
  const auto b = run_skeva(x, cfg, kmeans_backend());
  std::vector<Index> wa = a.winner_sketch, wb = b.winner_sketch;
  std::sort(wa.begin(), wa.end());
  std::sort(wb.begin(), wb.end());
  EXPECT_EQ(wa, wb);
  EXPECT_EQ(a.assignment.labels, b.assignment.labels);
  EXPECT_EQ(a.gated, b.gated);
}

TEST(RunSkeva, CauchySchwarzDivergenceRuns) {
  SkevaConfig cfg = small_config(6);
  cfg.divergence = Divergence::cs;
  const auto res = run_skeva(three_mode_data(), cfg, kmeans_backend());
  EXPECT_GT(res.gated, 0);
  for (const auto& d : res.draws) {
    EXPECT_GE(d.d_sketch_vs_unimodal, 0.0);
    if (d.passed_gate) EXPECT_GE(d.d_sketch_vs_validation, 0.0);
  }
}

TEST(RunSkeva, ValidationCostScalesQuadratically) {
  // Doubling n' at fixed n: the n'^2 self term dominates.
  Rng rng(3);
  Matrix x(4, 6000);
  for (Index i = 0; i < x.size(); ++i) x(i) = standard_normal(rng);
  SkevaConfig cfg;
  cfg.n = 20;
  cfg.seed = 1;
  const auto cost = [&](Index n_prime) {
    cfg.n_prime = n_prime;
    const DrawSampler sampler(x, cfg);
    const SketchPhase s = sketch_phase(x, cfg, sampler, 1);
    return median_time([&] { validation_phase(x, cfg, s); }, 7);
  };
  const double ratio = cost(2400) / cost(1200);
  EXPECT_GE(ratio, 2.5);
  EXPECT_LE(ratio, 6.0);
}

// ---------------------------------------------------------------------------
// Adaptive loop

TEST(RunSkevaAdaptive, RunningMeansMatchDirectAverages) {
  const Matrix& x = three_mode_data();
  SkevaConfig cfg = small_config(8);
  AdaptiveParams ap;
  ap.stop_on_bound = false;
  ap.hard_cap = 30;
  const auto out = run_skeva_adaptive(x, cfg, kmeans_backend(), ap);
  ASSERT_EQ(out.trace.r_hat.size(), 30u);

  SkevaConfig run_cfg = cfg;
  run_cfg.r_max = ap.hard_cap;
  const DrawSampler sampler(x, run_cfg);
  double s_ref = 0.0, s_vs = 0.0, s_vr = 0.0;
  const double h = run_cfg.sketch_bandwidth(1).h();
  const double conc = concentration_radius(cfg.n, h, 1, ap.q);
  for (int r = 1; r <= 30; ++r) {
    const SketchPhase s = sketch_phase(x, run_cfg, sampler, r);
    const ValidationPhase v = validation_phase(x, run_cfg, s);
    s_ref += d_ise_kde_ref(s.kde, s.reference);
    s_vs += std::sqrt(d_ise_kde_kde(v.kde, s.kde));
    s_vr += std::sqrt(d_ise_kde_ref(v.kde, s.reference));
    const auto i = static_cast<std::size_t>(r - 1);
    EXPECT_NEAR(out.trace.mean_ise_sketch_ref[i], s_ref / r, 1e-12 * s_ref / r);
    EXPECT_NEAR(out.trace.mean_dist_val_sketch[i], s_vs / r, 1e-12 * s_vs / r);
    EXPECT_NEAR(out.trace.mean_dist_val_ref[i], s_vr / r, 1e-12 * s_vr / r);
    const double delta0_bar = std::pow(conc + s_vs / r + s_vr / r, 2);
    EXPECT_NEAR(out.trace.delta0_bar[i], delta0_bar, 1e-12 * delta0_bar);
    const double ratio = (s_ref / r) / delta0_bar;
    const double rho = ratio < 1.0 ? std::log(1.0 - ap.p) / std::log1p(-ratio) : ap.r0;
    EXPECT_NEAR(out.trace.rho_bar[i], rho, 1e-9 * rho);
    EXPECT_EQ(out.trace.r_hat[i], std::max(out.trace.rho_bar[i], ap.r0));
  }
}

TEST(RunSkevaAdaptive, StopsAtEstimatedBoundWithFloor) {
  const Matrix& x = three_mode_data();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AdaptiveParams ap;
    ap.r0 = 3.0;
    const auto out = run_skeva_adaptive(x, small_config(seed), kmeans_backend(), ap);
    const auto& rh = out.trace.r_hat;
    const std::size_t stop = rh.size();
    ASSERT_GE(stop, 3u);
    for (double v : rh) EXPECT_GE(v, 3.0);
    for (std::size_t r = 1; r < stop; ++r) EXPECT_LT(static_cast<double>(r), rh[r - 1]);
    EXPECT_GE(static_cast<double>(stop), rh.back());
    EXPECT_EQ(out.run.draws.size(), stop);
  }
}

TEST(RunSkevaAdaptive, HardCapAndValidation) {
  AdaptiveParams ap;
  ap.hard_cap = 2;
  const auto out = run_skeva_adaptive(three_mode_data(), small_config(1), kmeans_backend(), ap);
  EXPECT_EQ(out.run.draws.size(), 2u);
  ap.p = 1.0;
  EXPECT_THROW(run_skeva_adaptive(three_mode_data(), small_config(1), kmeans_backend(), ap), config_error);
  ap.p = 0.99;
  ap.r0 = 0.5;
  EXPECT_THROW(run_skeva_adaptive(three_mode_data(), small_config(1), kmeans_backend(), ap), config_error);
}
