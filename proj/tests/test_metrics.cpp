#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "alforge/metrics.hpp"
#include "alforge/rng.hpp"

namespace alforge {
namespace {

TEST(Metrics, ArgmaxTiesGoLow) {
  const auto a = argmax_rows(Tensor::matrix({{0.4, 0.4, 0.2}, {0.1, 0.2, 0.7}}));
  EXPECT_EQ(a, (std::vector<std::int32_t>{0, 2}));
}

TEST(Metrics, AccuracyAndMse) {
  const std::vector<std::int32_t> p = {0, 1, 1, 2}, t = {0, 1, 2, 2};
  EXPECT_DOUBLE_EQ(accuracy(p, t), 0.75);
  EXPECT_ANY_THROW(accuracy(std::vector<std::int32_t>{}, std::vector<std::int32_t>{}));
  const Tensor pred = Tensor::matrix({{0.5, 0.5, 0.5, 0.5}, {0.0, 0.0, 0.0, 0.0}});
  const Tensor truth = Tensor::matrix({{0.6, 0.3, 0.5, 0.5}, {1.0, 1.0, 1.0, 1.0}});
  const std::vector<std::int32_t> mask = {1, 0};
  EXPECT_NEAR(loc_mse(pred, truth, mask), (0.01 + 0.04) / 4.0, 1e-15);
  EXPECT_THROW(loc_mse(pred, truth, std::vector<std::int32_t>{0, 0}), ContractError);
}

TEST(Calibration, HandBinnedExample) {
  // Confidences 0.95 (right), 0.95 (wrong), 0.65 (right), 1.0 (right).
  const Tensor probs = Tensor::matrix({{0.95, 0.05}, {0.05, 0.95}, {0.35, 0.65}, {1.0, 0.0}});
  const std::vector<std::int32_t> labels = {0, 0, 1, 0};
  const CalibrationCurve c = calibration(probs, labels, 10);
  ASSERT_EQ(c.bins.size(), 10u);
  EXPECT_EQ(c.bins[9].count, 3u);
  EXPECT_EQ(c.bins[6].count, 1u);
  EXPECT_NEAR(c.bins[9].mean_confidence, (0.95 + 0.95 + 1.0) / 3.0, 1e-15);
  EXPECT_NEAR(c.bins[9].accuracy, 2.0 / 3.0, 1e-15);
  const double e9 = std::abs(2.0 / 3.0 - 2.9 / 3.0), e6 = 1.0 - 0.65;
  EXPECT_NEAR(c.error, (e9 + e6) / 2.0, 1e-14);
  EXPECT_NEAR(c.weighted_error, (3 * e9 + e6) / 4.0, 1e-14);
  EXPECT_NEAR(c.bins[3].lower, 0.3, 1e-15);
}

TEST(Calibration, AlwaysWrongConfidentModelIsOne) {
  const Tensor probs = Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}});
  const std::vector<std::int32_t> labels = {1, 0, 1};
  EXPECT_EQ(calibration(probs, labels, 10).error, 1.0);
}

TEST(Calibration, PerClassModeUsesEveryProbability) {
  const Tensor probs = Tensor::matrix({{0.7, 0.3}});
  const std::vector<std::int32_t> labels = {0};
  const CalibrationCurve c = calibration(probs, labels, 10, CalibrationMode::PerClass);
  EXPECT_EQ(c.bins[7].count, 1u);
  EXPECT_EQ(c.bins[3].count, 1u);
  EXPECT_NEAR(c.error, (0.3 + 0.3) / 2.0, 1e-15);
}

TEST(Calibration, CalibratedBernoulliIsNearZero) {
  RngStream s(300, 0);
  const std::size_t n = 10000;
  Tensor probs({n, 2});
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = 0.5 + 0.5 * s.uniform();
    probs.at(i, 0) = p;
    probs.at(i, 1) = 1.0 - p;
    labels[i] = s.uniform() < p ? 0 : 1;
  }
  EXPECT_LT(calibration(probs, labels, 10).error, 0.02);
}

// Straightforward re-implementation: sort by key descending (stable), drop a
// prefix, average the rest.
std::vector<double> reference_curve(const std::vector<double>& loss, const std::vector<double>& key, std::size_t steps) {
  std::vector<std::size_t> order(loss.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] > key[b]; });
  std::vector<double> out;
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t removed = j * loss.size() / steps;
    double sum = 0.0;
    for (std::size_t k = removed; k < order.size(); ++k) sum += loss[order[k]];
    out.push_back(sum / static_cast<double>(order.size() - removed));
  }
  return out;
}

TEST(Sparsification, MatchesReferenceAndOracleIsMonotone) {
  RngStream s(301, 0);
  const std::size_t n = 137;
  std::vector<double> loss(n), unc(n);
  for (std::size_t i = 0; i < n; ++i) {
    loss[i] = std::abs(s.normal());
    unc[i] = loss[i] + s.normal();
  }
  const Sparsification sp = sparsification(loss, unc, 20);
  ASSERT_EQ(sp.method.mean_loss.size(), 20u);
  const auto ref_m = reference_curve(loss, unc, 20), ref_o = reference_curve(loss, loss, 20);
  double err = 0.0;
  for (std::size_t j = 0; j < 20; ++j) {
    EXPECT_NEAR(sp.method.mean_loss[j], ref_m[j], 1e-12);
    EXPECT_NEAR(sp.oracle.mean_loss[j], ref_o[j], 1e-12);
    EXPECT_NEAR(sp.method.retained_fraction[j], 1.0 - j / 20.0, 1e-15);
    if (j > 0) EXPECT_LE(sp.oracle.mean_loss[j], sp.oracle.mean_loss[j - 1] + 1e-15);
    EXPECT_LE(sp.oracle.mean_loss[j], sp.method.mean_loss[j] + 1e-12);
    err += std::abs(ref_m[j] - ref_o[j]);
  }
  EXPECT_NEAR(sp.error_sum, err / 20.0, 1e-12);
  EXPECT_TRUE(sp.oracle.oracle);
}

TEST(Sparsification, PerfectUncertaintyHasZeroError) {
  const std::vector<double> loss = {0.3, 2.0, 0.1, 5.0, 1.0};
  std::vector<double> unc;
  for (double l : loss) unc.push_back(std::exp(l));  // same ranking
  EXPECT_EQ(sparsification(loss, unc, 5).error_sum, 0.0);
}

TEST(Sparsification, AntiCorrelatedUncertaintyIsWorseThanRandom) {
  RngStream s(302, 0);
  std::vector<double> loss(500), anti(500), rnd(500);
  for (std::size_t i = 0; i < 500; ++i) {
    loss[i] = s.uniform();
    anti[i] = -loss[i];
    rnd[i] = s.uniform();
  }
  EXPECT_GT(sparsification(loss, anti).error_sum, sparsification(loss, rnd).error_sum);
}

TEST(Metrics, CrossEntropyLosses) {
  const auto l = cross_entropy_losses(Tensor::matrix({{0.25, 0.75}, {0.5, 0.5}}), std::vector<std::int32_t>{1, 0});
  EXPECT_NEAR(l[0], -std::log(0.75), 1e-15);
  EXPECT_NEAR(l[1], std::log(2.0), 1e-15);
}

TEST(ClassDelta, CumulativeDifferenceOverPoolCounts) {
  const std::vector<std::int32_t> labels = {0, 0, 0, 1, 1, 2};
  const QueryLog active = {{3}, {4, 5}};
  const QueryLog base = {{0}, {1, 2}};
  const std::vector<std::size_t> pool = {3, 2, 1};
  const auto d = class_distribution_delta(active, base, labels, pool);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0][0], -1.0 / 3.0);
  EXPECT_DOUBLE_EQ(d[0][1], 0.5);
  EXPECT_DOUBLE_EQ(d[0][2], 0.0);
  EXPECT_DOUBLE_EQ(d[1][0], -1.0);
  EXPECT_DOUBLE_EQ(d[1][1], 1.0);
  EXPECT_DOUBLE_EQ(d[1][2], 1.0);
}

TEST(ClassDelta, EmptyPoolClassGivesZeroAndCannotBeQueried) {
  const std::vector<std::vector<std::size_t>> a = {{1, 0}}, b = {{1, 0}}, bad = {{0, 1}};
  const std::vector<std::size_t> pool = {4, 0};
  EXPECT_EQ(class_distribution_delta_counts(a, b, pool)[0][1], 0.0);
  EXPECT_ANY_THROW(class_distribution_delta_counts(bad, b, pool));
}

std::vector<CurvePoint> linear_curve(double acc0, double acc_slope, double mse0, double mse_slope) {
  std::vector<CurvePoint> c;
  for (std::size_t s = 0; s <= 10; ++s) {
    c.push_back({100 + 50 * s, acc0 + acc_slope * s, mse0 + mse_slope * s});
  }
  return c;
}

TEST(Crossings, FirstPointAtOrBelowThreshold) {
  const ReferenceMetrics ref{0.9, 0.01};
  // accuracy 0.80 + 0.01 s: error 0.1 - 0.01 s reaches 0.05 at s = 5.
  const auto curve = linear_curve(0.80, 0.01, 0.03, -0.002);
  EXPECT_EQ(labels_to_reach(curve, ref, ErrorKind::Classification, 0.05), std::optional<std::size_t>(350));
  EXPECT_EQ(labels_to_reach(linear_curve(0.70, 0.01, 0.03, 0.0), ref, ErrorKind::Classification, 0.05), std::nullopt);
  // mse 0.03 - 0.002 s: relative error (0.02 - 0.002 s) / 0.01 reaches 0.6 at s = 7.
  EXPECT_EQ(labels_to_reach(curve, ref, ErrorKind::Localization, 0.6), std::optional<std::size_t>(450));
  EXPECT_NEAR(relative_error(curve[0], ref, ErrorKind::Localization), 2.0, 1e-12);
}

TEST(Crossings, SavingsReport) {
  const ReferenceMetrics ref{0.9, 0.01};
  const auto method = linear_curve(0.80, 0.02, 0.03, -0.002);
  const auto base = linear_curve(0.80, 0.01, 0.03, -0.001);
  const std::vector<double> ct = {0.05, 0.15}, lt = {0.6};
  const auto rep = relative_error_report(method, base, ref, ct, lt);
  ASSERT_EQ(rep.size(), 3u);
  // method reaches 0.05 at s = 3 (250 labels), baseline at s = 5 (350).
  EXPECT_EQ(rep[0].method_labels, std::optional<std::size_t>(250));
  EXPECT_EQ(rep[0].baseline_labels, std::optional<std::size_t>(350));
  EXPECT_NEAR(*rep[0].savings, 1.0 - 250.0 / 350.0, 1e-15);
  EXPECT_EQ(rep[1].savings, std::optional<double>(0.0));  // both start below 0.15
  EXPECT_EQ(rep[2].kind, ErrorKind::Localization);
  EXPECT_EQ(rep[2].method_labels, std::optional<std::size_t>(450));
  EXPECT_EQ(rep[2].baseline_labels, std::nullopt);  // 0.02 - 0.001 s never <= 0.006
}

TEST(MetricsCsv, RoundTripIsExact) {
  std::vector<MetricsRecord> recs(2);
  recs[0] = {0, 150, 0.1 + 0.2, 1.0 / 3.0, 0.05, 0.04, 0.123456789012345678, {50, 50, 50}, 1.5};
  recs[1] = {1, 200, 0.9, 1e-300, 0.0, 0.0, 0.0, {10, 30, 10}, 2.0};
  const auto path = (std::filesystem::temp_directory_path() / "alforge_metrics_test.csv").string();
  write_metrics_csv(path, recs, 3);
  const auto back = read_metrics_csv(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].step, recs[i].step);
    EXPECT_EQ(back[i].labeled_count, recs[i].labeled_count);
    EXPECT_EQ(back[i].accuracy, recs[i].accuracy);
    EXPECT_EQ(back[i].loc_mse, recs[i].loc_mse);
    EXPECT_EQ(back[i].calibration_error, recs[i].calibration_error);
    EXPECT_EQ(back[i].calibration_error_weighted, recs[i].calibration_error_weighted);
    EXPECT_EQ(back[i].error_sum, recs[i].error_sum);
    EXPECT_EQ(back[i].queried_per_class, recs[i].queried_per_class);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace alforge
