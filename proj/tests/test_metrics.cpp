#include "skeva/data.hpp"
#include "skeva/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>

using namespace skeva;

namespace {

Labels random_labels(std::size_t n, int k, Rng& rng) {
  Labels l(n);
  for (auto& v : l) v = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k)));
  return l;
}

Labels relabel(const Labels& l, const std::vector<int>& map) {
  Labels out(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = map[static_cast<std::size_t>(l[i])];
  return out;
}

// Accuracy by enumerating every injective map from predicted to true labels.
double brute_force_accuracy(const Labels& pred, const Labels& truth) {
  const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const int k = std::max(kp, kt);
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[static_cast<std::size_t>(pred[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

// Plug-in NMI from the joint counts, written directly from the definitions.
double direct_nmi(const Labels& a, const Labels& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
    pab[{a[i], b[i]}] += 1.0 / n;
  }
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (auto& [k, p] : pa) ha -= p * std::log(p);
  for (auto& [k, p] : pb) hb -= p * std::log(p);
  for (auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  const double denom = std::max(ha, hb);
  return denom == 0.0 ? 1.0 : mi / denom;
}

double busy_work(int reps) {
  volatile double acc = 0.0;
  for (int i = 0; i < reps; ++i) acc = acc + std::sqrt(static_cast<double>(i) + acc * 1e-12);
  return acc;
}

}  // namespace

TEST(Accuracy, IdentityAndRelabeling) {
  const Labels truth{0, 0, 1, 1, 2, 2, 2};
  EXPECT_EQ(accuracy(truth, truth), 1.0);
  EXPECT_EQ(accuracy(relabel(truth, {2, 0, 1}), truth), 1.0);
  EXPECT_EQ(accuracy(relabel(truth, {7, 3, 5}), truth), 1.0);
}

TEST(Accuracy, CrossedPairs) {
  EXPECT_EQ(accuracy({0, 0, 1, 1}, {0, 1, 0, 1}), 0.5);
}

TEST(Accuracy, MatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int kp = 1 + static_cast<int>(uniform_index(rng, 5));
    const int kt = 1 + static_cast<int>(uniform_index(rng, 5));
    const std::size_t n = 5 + uniform_index(rng, 40);
    const Labels pred = random_labels(n, kp, rng);
    const Labels truth = random_labels(n, kt, rng);
    EXPECT_DOUBLE_EQ(accuracy(pred, truth), brute_force_accuracy(pred, truth)) << "trial " << trial;
  }
}

TEST(Accuracy, MajorityBaselineAtLeastOneOverK) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(uniform_index(rng, 6));
    const Labels truth = random_labels(30, k, rng);
    const Labels all_same(truth.size(), 0);
    EXPECT_GE(accuracy(all_same, truth), 1.0 / k);
  }
}

TEST(Accuracy, RejectsMismatchedLengths) {
  EXPECT_THROW(accuracy({0, 1}, {0}), config_error);
  EXPECT_THROW(accuracy({}, {}), config_error);
}

TEST(Nmi, IdentityBalanced) {
  EXPECT_DOUBLE_EQ(nmi({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(nmi({1, 1, 0, 0}, {0, 0, 1, 1}), 1.0);
}

TEST(Nmi, IndependentIsZero) {
  EXPECT_EQ(nmi({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0);
  // Joint counts equal the product of the marginals.
  const Labels a{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  const Labels b{0, 0, 1, 1, 2, 2, 0, 0, 1, 1, 2, 2};
  EXPECT_NEAR(nmi(a, b), 0.0, 1e-15);
}

TEST(Nmi, SingleClusterConvention) {
  EXPECT_EQ(nmi({3, 3, 3}, {0, 0, 0}), 1.0);
  EXPECT_EQ(nmi({0, 0, 0, 0}, {0, 1, 0, 1}), 0.0);
}

TEST(Nmi, MatchesDirectComputationAndIsSymmetric) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 60);
    const Labels a = random_labels(n, 1 + static_cast<int>(uniform_index(rng, 6)), rng);
    const Labels b = random_labels(n, 1 + static_cast<int>(uniform_index(rng, 6)), rng);
    EXPECT_NEAR(nmi(a, b), std::clamp(direct_nmi(a, b), 0.0, 1.0), 1e-12);
    EXPECT_EQ(nmi(a, b), nmi(b, a));
    const double v = nmi(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Metrics, InvariantUnderRelabeling) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Labels pred = random_labels(40, 4, rng);
    const Labels truth = random_labels(40, 3, rng);
    std::vector<int> mp{0, 1, 2, 3}, mt{0, 1, 2};
    shuffle(mp, rng);
    shuffle(mt, rng);
    EXPECT_DOUBLE_EQ(accuracy(relabel(pred, mp), relabel(truth, mt)), accuracy(pred, truth));
    EXPECT_NEAR(nmi(relabel(pred, mp), relabel(truth, mt)), nmi(pred, truth), 1e-14);
  }
}

TEST(Timed, NoOpIsFast) {
  const double t = timed([] {});
  EXPECT_GE(t, 0.0);
  EXPECT_LT(t, 1e-3);
}

TEST(Timed, SequentialRunsAdd) {
  // Medians over repeats damp scheduler noise.
  const int reps = 4'000'000;
  std::vector<double> ta, tb, tab;
  for (int r = 0; r < 5; ++r) {
    ta.push_back(timed([&] { busy_work(reps); }));
    tb.push_back(timed([&] { busy_work(2 * reps); }));
    tab.push_back(timed([&] {
      busy_work(reps);
      busy_work(2 * reps);
    }));
  }
  for (auto* v : {&ta, &tb, &tab}) std::sort(v->begin(), v->end());
  EXPECT_NEAR(tab[2], ta[2] + tb[2], 0.1 * (ta[2] + tb[2]));
}

TEST(Timed, ExcludesDataLoading) {
  const auto path = std::filesystem::temp_directory_path() / "skeva_metrics_timing.csv";
  Rng rng(1);
  Matrix big(16, 50000);
  for (Index i = 0; i < big.size(); ++i) big(i) = standard_normal(rng);
  save_csv(big, path.string());
  double load_time = 0.0;
  DataMatrix data;
  load_time = timed([&] { data = load_csv(path.string()); });
  const Labels truth(static_cast<std::size_t>(data.size()), 0);
  Labels pred;
  const double run_time = timed([&] { pred.assign(truth.size(), 0); });
  const EvalResult r = evaluate("noop", pred, truth, run_time);
  EXPECT_LT(r.wall_time_s, load_time);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.algorithm, "noop");
  std::filesystem::remove(path);
}
