#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "alforge/dataset.hpp"
#include "alforge/keyvalue.hpp"
#include "alforge/metrics.hpp"
#include "alforge/network.hpp"
#include "alforge/rng.hpp"
#include "alforge/uncertainty.hpp"

namespace alforge {

enum class StopRule { MaxSteps, Convergence, Target };

std::string_view stop_rule_name(StopRule r);
StopRule parse_stop_rule(std::string_view name);

struct LoopConfig {
  std::size_t seed_per_class = 200;
  std::size_t query_batch = 200;
  std::size_t max_steps = 60;
  Strategy strategy = Strategy::Random;
  std::size_t repetitions = 3;
  StopRule stop_rule = StopRule::MaxSteps;
  double convergence_epsilon = 1e-3;
  std::size_t convergence_window = 3;
  double target_accuracy = 0.9;
  std::size_t ensemble_size = 5;
  std::size_t mc_passes = 20;
  std::size_t calibration_bins = 10;
  std::size_t sparsification_steps = 20;

  void validate() const;
  KeyValues to_key_values(const std::string& prefix = "loop.") const;
  static LoopConfig overlay(LoopConfig base, const KeyValues& kv, const std::string& prefix = "loop.");
};

struct QueryRecord {
  std::size_t step = 0;
  Strategy strategy = Strategy::Random;
  std::vector<std::size_t> indices;  // in rank order
};

/// Labeled / unlabeled partition of the training pool, both kept sorted.
struct PoolState {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<QueryRecord> log;
  std::vector<std::size_t> shortfall;  // per class, from the seed draw

  /// Moves `indices` from unlabeled to labeled. Throws ContractError for an
  /// index that is not currently unlabeled or appears twice.
  void move_to_labeled(std::span<const std::size_t> indices);
  /// Throws ContractError unless labeled and unlabeled partition [0, n).
  void check_partition(std::size_t n) const;
};

/// Draws `per_class` indices of every class uniformly without replacement;
/// a class with fewer samples gives all of them and its shortfall is kept.
PoolState init_seed_set(const Dataset& dataset, std::size_t per_class, const RngStream& stream);

/// Positions (into `scores`) of the k highest scores; ties go to the lower
/// dataset index in `ids`. Result is in rank order.
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::span<const std::size_t> ids, std::size_t k);

/// Simulated annotator over the training pool's stored ground truth.
struct Oracle {
  const Dataset* truth = nullptr;
};

struct OracleAnswer {
  std::vector<std::int32_t> labels;
  Tensor locations;  // [k x 4]
  std::vector<std::int32_t> loc_mask;
};

/// Ground truth for `indices`, which must all be unlabeled in `pool` and
/// distinct.
OracleAnswer oracle_label(const Oracle& oracle, const PoolState& pool, std::span<const std::size_t> indices);

bool stop_condition(std::span<const MetricsRecord> history, const LoopConfig& config);

/// Per-step evaluation artifacts kept alongside the metrics rows.
struct StepDiagnostics {
  CalibrationCurve calibration;
  Sparsification sparsification;
};

struct LoopOptions {
  bool parallel = true;
  /// Called after each step's evaluation with the record and pool state.
  std::function<void(const MetricsRecord&, const PoolState&)> on_step;
};

struct LoopResult {
  std::vector<MetricsRecord> records;
  std::vector<StepDiagnostics> diagnostics;
  PoolState pool;
  std::vector<std::size_t> pool_class_counts;  // unlabeled pool after seeding
};

/// Named sub-stream tags of the master seed.
namespace stream_tag {
inline constexpr std::uint64_t kSeedSet = 0x5eed;
inline constexpr std::uint64_t kTrain = 0x7a1;
inline constexpr std::uint64_t kScore = 0x5c0;
inline constexpr std::uint64_t kEval = 0xe7a;
}  // namespace stream_tag

/// Trains the models a strategy needs on `labeled` (E members for ens-*).
std::vector<Model> train_models(const Dataset& labeled, const NetworkConfig& net, Strategy strategy,
                                std::size_t ensemble_size, const RngStream& root, std::size_t step, bool parallel);

/// Seed, then score / select / label / retrain / evaluate until the stop
/// condition holds or the pool is empty. The seed set depends only on the
/// master seed, so strategies sharing a seed start from the same labels.
LoopResult run_loop(const Dataset& train, const Dataset& test, const LoopConfig& config, const NetworkConfig& net,
                    std::uint64_t master_seed, const LoopOptions& options = {});

/// One line per query step: "<step> <strategy> i1,i2,...".
void write_query_log(const std::string& path, const std::vector<QueryRecord>& log);
std::vector<QueryRecord> read_query_log(const std::string& path);

}  // namespace alforge
