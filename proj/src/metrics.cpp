#include "alforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "alforge/csv.hpp"
#include "alforge/keyvalue.hpp"

namespace alforge {

namespace {

// Indices sorted by descending key, ties by ascending index.
std::vector<std::size_t> removal_order(std::span<const double> key) {
  std::vector<std::size_t> order(key.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

ErrorCurve curve_for(std::span<const double> losses, const std::vector<std::size_t>& order, std::size_t steps,
                     bool oracle) {
  const std::size_t n = losses.size();
  ErrorCurve c;
  c.oracle = oracle;
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t removed = j * n / steps;
    double sum = 0.0;
    for (std::size_t r = removed; r < n; ++r) sum += losses[order[r]];
    c.retained_fraction.push_back(1.0 - static_cast<double>(j) / static_cast<double>(steps));
    c.mean_loss.push_back(sum / static_cast<double>(n - removed));
  }
  return c;
}

}  // namespace

std::vector<std::int32_t> argmax_rows(const Tensor& probs) {
  if (probs.rank() != 2) throw DimensionError("argmax_rows expects an [n x C] matrix");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  std::vector<std::int32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (probs.at(i, j) > probs.at(i, best)) best = j;
    }
    out[i] = static_cast<std::int32_t>(best);
  }
  return out;
}

double accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
  if (predicted.empty()) throw ContractError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double loc_mse(const Tensor& predicted, const Tensor& truth, std::span<const std::int32_t> mask) {
  if (predicted.shape() != truth.shape() || predicted.rank() != 2 || predicted.dim(1) != 4 ||
      mask.size() != predicted.dim(0)) {
    throw DimensionError("loc_mse: expected matching [n x 4] tensors and an n-long mask");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    for (std::size_t k = 0; k < 4; ++k) {
      const double d = predicted.at(i, k) - truth.at(i, k);
      sum += d * d;
    }
  }
  if (count == 0) throw ContractError("loc_mse: every sample is masked out");
  return sum / static_cast<double>(count * 4);
}

CalibrationCurve calibration(const Tensor& probs, std::span<const std::int32_t> labels, std::size_t bins,
                             CalibrationMode mode) {
  if (bins < 2) throw ContractError("calibration needs at least 2 bins");
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) throw DimensionError("calibration: shape mismatch");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  auto add = [&](double conf, bool correct) {
    auto b = static_cast<std::size_t>(conf * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    conf_sum[b] += conf;
    hit_sum[b] += correct ? 1.0 : 0.0;
    ++count[b];
  };
  if (mode == CalibrationMode::ArgMax) {
    const auto pred = argmax_rows(probs);
    for (std::size_t i = 0; i < n; ++i) add(probs.at(i, static_cast<std::size_t>(pred[i])), pred[i] == labels[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) add(probs.at(i, j), static_cast<std::int32_t>(j) == labels[i]);
    }
  }
  CalibrationCurve out;
  std::size_t non_empty = 0, total = 0;
  double dev_sum = 0.0, weighted_sum = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    CalibrationBin bin;
    bin.lower = static_cast<double>(b) / static_cast<double>(bins);
    bin.upper = static_cast<double>(b + 1) / static_cast<double>(bins);
    bin.count = count[b];
    if (count[b] > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(count[b]);
      bin.accuracy = hit_sum[b] / static_cast<double>(count[b]);
      const double dev = std::abs(bin.accuracy - bin.mean_confidence);
      dev_sum += dev;
      weighted_sum += dev * static_cast<double>(count[b]);
      ++non_empty;
      total += count[b];
    }
    out.bins.push_back(bin);
  }
  if (non_empty > 0) {
    out.error = dev_sum / static_cast<double>(non_empty);
    out.weighted_error = weighted_sum / static_cast<double>(total);
  }
  return out;
}

Sparsification sparsification(std::span<const double> losses, std::span<const double> uncertainty, std::size_t steps) {
  if (losses.size() != uncertainty.size()) throw DimensionError("sparsification: length mismatch");
  if (steps < 2) throw ContractError("sparsification needs at least 2 steps");
  if (losses.empty()) throw ContractError("sparsification of an empty set");
  Sparsification s;
  s.method = curve_for(losses, removal_order(uncertainty), steps, false);
  s.oracle = curve_for(losses, removal_order(losses), steps, true);
  double dev = 0.0;
  for (std::size_t j = 0; j < steps; ++j) dev += std::abs(s.method.mean_loss[j] - s.oracle.mean_loss[j]);
  s.error_sum = dev / static_cast<double>(steps);
  return s;
}

std::vector<double> cross_entropy_losses(const Tensor& probs, std::span<const std::int32_t> labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) throw DimensionError("cross_entropy_losses: shape mismatch");
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs.at(i, static_cast<std::size_t>(labels[i]));
    out[i] = -std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  return out;
}

std::vector<std::vector<double>> class_distribution_delta_counts(
    const std::vector<std::vector<std::size_t>>& active, const std::vector<std::vector<std::size_t>>& baseline,
    std::span<const std::size_t> pool_counts) {
  if (active.size() != baseline.size()) {
    throw ContractError("query logs cover " + std::to_string(active.size()) + " and " +
                        std::to_string(baseline.size()) + " steps");
  }
  const std::size_t c = pool_counts.size();
  std::vector<long long> cum(c, 0);
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < active.size(); ++s) {
    if (active[s].size() != c || baseline[s].size() != c) throw DimensionError("query counts have the wrong class count");
    for (std::size_t k = 0; k < c; ++k) {
      if (pool_counts[k] == 0 && (active[s][k] != 0 || baseline[s][k] != 0)) {
        throw ContractError("class " + std::to_string(k) + " was queried but has no pool samples");
      }
      cum[k] += static_cast<long long>(active[s][k]) - static_cast<long long>(baseline[s][k]);
    }
    std::vector<double> row(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      if (pool_counts[k] > 0) row[k] = static_cast<double>(cum[k]) / static_cast<double>(pool_counts[k]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<double>> class_distribution_delta(const QueryLog& active, const QueryLog& baseline,
                                                          std::span<const std::int32_t> labels,
                                                          std::span<const std::size_t> pool_counts) {
  auto counts = [&](const QueryLog& log) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& step : log) {
      std::vector<std::size_t> row(pool_counts.size(), 0);
      for (std::size_t i : step) ++row.at(static_cast<std::size_t>(labels[i]));
      out.push_back(std::move(row));
    }
    return out;
  };
  return class_distribution_delta_counts(counts(active), counts(baseline), pool_counts);
}

double relative_error(const CurvePoint& p, const ReferenceMetrics& ref, ErrorKind kind) {
  if (kind == ErrorKind::Classification) return std::abs(ref.accuracy - p.accuracy);
  return std::abs(p.loc_mse - ref.loc_mse) / ref.loc_mse;
}

std::optional<std::size_t> labels_to_reach(std::span<const CurvePoint> curve, const ReferenceMetrics& ref,
                                           ErrorKind kind, double threshold) {
  for (const CurvePoint& p : curve) {
    if (relative_error(p, ref, kind) <= threshold + 1e-12) return p.labeled;
  }
  return std::nullopt;
}

std::vector<SavingsEntry> relative_error_report(std::span<const CurvePoint> method, std::span<const CurvePoint> baseline,
                                                const ReferenceMetrics& ref,
                                                std::span<const double> classification_thresholds,
                                                std::span<const double> localization_thresholds) {
  std::vector<SavingsEntry> out;
  auto run = [&](ErrorKind kind, std::span<const double> thresholds) {
    for (double t : thresholds) {
      SavingsEntry e;
      e.kind = kind;
      e.threshold = t;
      e.baseline_labels = labels_to_reach(baseline, ref, kind, t);
      e.method_labels = labels_to_reach(method, ref, kind, t);
      if (e.baseline_labels && e.method_labels) {
        e.savings = 1.0 - static_cast<double>(*e.method_labels) / static_cast<double>(*e.baseline_labels);
      }
      out.push_back(e);
    }
  };
  run(ErrorKind::Classification, classification_thresholds);
  run(ErrorKind::Localization, localization_thresholds);
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records, std::size_t num_classes) {
  std::vector<std::string> header = {"step",           "labeled_count", "accuracy",
                                     "loc_mse",        "calibration_error", "calibration_error_weighted",
                                     "error_sum"};
  for (std::size_t c = 0; c < num_classes; ++c) header.push_back("queried_" + std::to_string(c));
  CsvWriter w(header);
  for (const auto& r : records) {
    w.cell(r.step).cell(r.labeled_count).cell(r.accuracy).cell(r.loc_mse).cell(r.calibration_error);
    w.cell(r.calibration_error_weighted).cell(r.error_sum);
    for (std::size_t c = 0; c < num_classes; ++c) {
      w.cell(c < r.queried_per_class.size() ? r.queried_per_class[c] : std::size_t{0});
    }
    w.end_row();
  }
  w.save(path);
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::size_t classes = 0;
  while (t.has_column("queried_" + std::to_string(classes))) ++classes;
  std::vector<MetricsRecord> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    MetricsRecord r;
    r.step = parse_uint(t.text(i, "step"), "step");
    r.labeled_count = parse_uint(t.text(i, "labeled_count"), "labeled_count");
    r.accuracy = t.number(i, "accuracy");
    r.loc_mse = t.number(i, "loc_mse");
    r.calibration_error = t.number(i, "calibration_error");
    r.calibration_error_weighted = t.number(i, "calibration_error_weighted");
    r.error_sum = t.number(i, "error_sum");
    for (std::size_t c = 0; c < classes; ++c) {
      r.queried_per_class.push_back(parse_uint(t.text(i, "queried_" + std::to_string(c)), "queried"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace alforge
