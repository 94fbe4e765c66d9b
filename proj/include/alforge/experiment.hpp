#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "alforge/al_loop.hpp"
#include "alforge/dataset.hpp"
#include "alforge/keyvalue.hpp"
#include "alforge/metrics.hpp"
#include "alforge/network.hpp"

namespace alforge {

/// Bad flags or configuration values; the CLI maps it to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where a run's train/test split comes from: a gen-data container
/// (`path`/train and `path`/test) or an in-memory generator.
struct DataSource {
  std::string path;
  std::string preset = "kitti-ratios";
  std::string kind = "cluster";  // cluster | patch
  std::size_t n_train = 4000;
  std::size_t n_test = 2000;
  std::size_t feature_dim = 8;
  double separation = 4.0;
  std::size_t patch_size = 16;
  double zero_fill = 0.5;
  double background_fraction = 0.3;  // proposals preset only
  double band_fraction = 0.1;
  std::uint64_t seed = 7;

  KeyValues to_key_values() const;
  static DataSource overlay(DataSource base, const KeyValues& kv);
};

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Generates the split described by `source` (ignores `path`). The
/// proposals preset runs the detector simulator over both splits and
/// appends the IoU 0.2-0.5 band to the test split.
DataSplit generate_data(const DataSource& source);
DataSplit load_data(const DataSource& source);

/// FNV-1a over the encoded tensors of a dataset.
std::uint64_t dataset_fingerprint(const Dataset& ds);

struct ExperimentConfig {
  DataSource data;
  KeyValues net_overrides;  // "net." keys applied on top of the desk preset
  LoopConfig loop;
  std::vector<Strategy> strategies = {Strategy::Random};
  std::uint64_t master_seed = 1;
  std::string out = "runs";
  bool reference = true;

  /// Reads data.*, net.*, loop.*, strategies, seed, out and reference.
  /// Throws UsageError on malformed values.
  static ExperimentConfig from_key_values(const KeyValues& kv);
  /// Echo with the network config resolved against `resolved_net`.
  KeyValues to_key_values(const NetworkConfig& resolved_net) const;
  NetworkConfig resolve_network(const Dataset& train) const;
};

/// Writes `out`/train and `out`/test containers and prints class counts.
void cmd_gen_data(const DataSource& source, const std::string& out, std::ostream& log);

/// Executes every strategy x repetition and writes, per pair,
/// metrics_<s>_<r>.csv, querylog_<s>_<r>.txt, calib_<s>_<r>.csv and
/// errcurve_<s>_<r>.csv, plus pool_<r>.csv, reference_<r>.csv, run.log and
/// config.echo. Progress with wall times goes to `log`.
void cmd_run(const ExperimentConfig& config, std::ostream& log);

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string baseline = "random";
  std::vector<double> classification_thresholds = {0.05, 0.04, 0.03, 0.02};
  std::vector<double> localization_thresholds = {0.75, 0.30, 0.15, 0.05};
  std::string out_csv;  // optional
};

struct ReportRow {
  ErrorKind kind = ErrorKind::Classification;
  double threshold = 0.0;
  std::string strategy;
  std::size_t repetition = 0;
  SavingsEntry entry;
};

struct ReportSummary {
  ErrorKind kind = ErrorKind::Classification;
  double threshold = 0.0;
  std::string strategy;
  std::size_t reached = 0;  // repetitions where both curves crossed
  std::size_t repetitions = 0;
  double mean_savings = 0.0;
  double min_savings = 0.0;
  double max_savings = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<ReportSummary> summary;
};

/// Crossing points and savings vs the baseline for every strategy and
/// repetition found in the input directories. Refuses (UsageError) when
/// the directories' config.echo files disagree on anything but the
/// strategy list and output directory.
Report cmd_report(const ReportOptions& options, std::ostream& out);

/// learning_curve.csv, calibration_step<k>.csv, errorcurve_step<k>.csv and
/// classdelta.csv from one run directory.
void cmd_plot_data(const std::string& in, const std::string& out, const std::string& baseline, std::ostream& log);

/// Full command line (argv[0] first). Returns the process exit code: 0
/// success, 2 usage error, 1 runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace alforge
