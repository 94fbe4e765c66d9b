#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alforge/tensor.hpp"

namespace alforge {

/// One evaluation row per query step.
struct MetricsRecord {
  std::size_t step = 0;
  std::size_t labeled_count = 0;
  double accuracy = 0.0;
  double loc_mse = 0.0;
  double calibration_error = 0.0;
  double calibration_error_weighted = 0.0;
  double error_sum = 0.0;
  std::vector<std::size_t> queried_per_class;  // this step's queries
  double wall_time_s = 0.0;                    // not written to CSV
};

/// Row-wise argmax; ties go to the lower class index.
std::vector<std::int32_t> argmax_rows(const Tensor& probs);

double accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> truth);

/// Mean over masked samples and the 4 components of squared differences.
double loc_mse(const Tensor& predicted, const Tensor& truth, std::span<const std::int32_t> mask);

enum class CalibrationMode {
  ArgMax,    // one (confidence, correct) pair per sample: top-class probability
  PerClass,  // one pair per (sample, class): p(y=c|x), correct iff label == c
};

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
  double error = 0.0;           // unweighted mean |accuracy - confidence| over non-empty bins
  double weighted_error = 0.0;  // count-weighted variant
};

/// Equal-width bins over [0, 1]; confidence 1.0 falls in the last bin.
CalibrationCurve calibration(const Tensor& probs, std::span<const std::int32_t> labels, std::size_t bins,
                             CalibrationMode mode = CalibrationMode::ArgMax);

struct ErrorCurve {
  std::vector<double> retained_fraction;  // 1, 1 - 1/steps, ..., 1/steps
  std::vector<double> mean_loss;
  bool oracle = false;
};

struct Sparsification {
  ErrorCurve method;
  ErrorCurve oracle;
  double error_sum = 0.0;  // mean over grid points of |method - oracle|
};

/// Removes the most uncertain (method) or highest-loss (oracle) samples in
/// `steps` equal fractions; at grid point j, floor(j * n / steps) samples
/// are gone. Ties are removed lower index first.
Sparsification sparsification(std::span<const double> losses, std::span<const double> uncertainty,
                              std::size_t steps = 20);

/// Per-sample cross-entropy of `probs` against `labels`.
std::vector<double> cross_entropy_losses(const Tensor& probs, std::span<const std::int32_t> labels);

/// Queried indices per step, step 1 first.
using QueryLog = std::vector<std::vector<std::size_t>>;

/// delta[s][c] = (cumulative AL queries of class c up to step s - the same
/// for the baseline) / pool_counts[c]. A class with no pool samples (all
/// taken by the seed set) cannot be queried and gets delta 0.
std::vector<std::vector<double>> class_distribution_delta(const QueryLog& active, const QueryLog& baseline,
                                                          std::span<const std::int32_t> labels,
                                                          std::span<const std::size_t> pool_counts);

/// Same delta from per-step query counts per class (counts[s][c]).
std::vector<std::vector<double>> class_distribution_delta_counts(
    const std::vector<std::vector<std::size_t>>& active, const std::vector<std::vector<std::size_t>>& baseline,
    std::span<const std::size_t> pool_counts);

struct CurvePoint {
  std::size_t labeled = 0;
  double accuracy = 0.0;
  double loc_mse = 0.0;
};

struct ReferenceMetrics {
  double accuracy = 0.0;
  double loc_mse = 0.0;
};

enum class ErrorKind { Classification, Localization };

/// |acc_full - acc| for classification, |mse - mse_full| / mse_full for localization.
double relative_error(const CurvePoint& p, const ReferenceMetrics& ref, ErrorKind kind);

/// Labeled count at the first point whose relative error is at or below
/// `threshold` (1e-12 slack for decimal thresholds); nullopt if never.
std::optional<std::size_t> labels_to_reach(std::span<const CurvePoint> curve, const ReferenceMetrics& ref,
                                           ErrorKind kind, double threshold);

struct SavingsEntry {
  ErrorKind kind = ErrorKind::Classification;
  double threshold = 0.0;
  std::optional<std::size_t> baseline_labels;
  std::optional<std::size_t> method_labels;
  std::optional<double> savings;  // 1 - method / baseline when both reached
};

std::vector<SavingsEntry> relative_error_report(std::span<const CurvePoint> method, std::span<const CurvePoint> baseline,
                                                const ReferenceMetrics& ref,
                                                std::span<const double> classification_thresholds,
                                                std::span<const double> localization_thresholds);

/// Metrics CSV: step, labeled_count, accuracy, loc_mse, calibration_error,
/// calibration_error_weighted, error_sum, queried_0..queried_{C-1}.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records, std::size_t num_classes);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace alforge
