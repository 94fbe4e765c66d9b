#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alforge/network.hpp"
#include "alforge/rng.hpp"
#include "alforge/tensor.hpp"

namespace alforge {

enum class Strategy { Random, SoftmaxEntropy, McEntropy, McMi, EnsEntropy, EnsMi };

/// How a strategy builds its predictive distribution.
enum class Estimator { Softmax, McDropout, Ensemble };

std::string_view strategy_name(Strategy s);
/// Accepts the CLI names: random, softmax-entropy, mc-entropy, mc-mi,
/// ens-entropy, ens-mi. Throws ConfigError otherwise.
Strategy parse_strategy(std::string_view name);
Estimator estimator_of(Strategy s);
bool uses_mutual_information(Strategy s);
/// Models a strategy consumes per step (ensemble size for ens-*, else 1).
std::size_t models_per_step(Strategy s, std::size_t ensemble_size);

/// Class-probability samples from M stochastic passes or ensemble members.
struct PredictiveSet {
  Tensor member_probs;  // [M x n x C]
  Tensor mean_probs;    // [n x C]

  std::size_t members() const { return member_probs.dim(0); }
  std::size_t samples() const { return member_probs.dim(1); }
  std::size_t classes() const { return member_probs.dim(2); }

  /// Builds the set and its member mean. The mean is accumulated as
  /// m0 + sum(m_k - m0) / M, so identical members reproduce m0 bitwise.
  static PredictiveSet from_members(Tensor member_probs);
};

PredictiveSet softmax_single(const Model& model, const Tensor& inputs);

/// `passes` train-mode forward passes per sample. Sample i draws its masks
/// from `stream.substream(id_i)`, where id_i is `sample_ids[i]` (or i when
/// no ids are given); the result is independent of thread count.
PredictiveSet mc_dropout_predict(const Model& model, const Tensor& inputs, std::size_t passes, const RngStream& stream,
                                 std::span<const std::size_t> sample_ids = {}, bool parallel = true);

/// One deterministic pass per member; members must share a config.
PredictiveSet ensemble_predict(std::span<const Model> models, const Tensor& inputs);

/// Per-row entropy in nats, 0 log 0 = 0. Rows must sum to 1 within 1e-6.
std::vector<double> shannon_entropy(const Tensor& probs);

struct MutualInformation {
  std::vector<double> score;  // clamped at 0
  std::vector<double> raw;    // H(mean) - mean_m H(member m), unclamped
};

MutualInformation mutual_information(const PredictiveSet& ps);

struct AcquisitionScore {
  Strategy strategy = Strategy::Random;
  std::vector<double> score;
  std::vector<double> raw;  // unclamped MI for *-mi strategies, else equal to score
};

struct ScoreOptions {
  std::size_t mc_passes = 20;
  /// Dataset indices of the pool rows; used to key per-sample streams.
  std::span<const std::size_t> sample_ids;
  bool parallel = true;
};

/// Builds the strategy's predictive set over `pool` and scores it. The
/// random strategy returns uniform draws, so top-k selection reduces to
/// uniform sampling without replacement.
AcquisitionScore score_pool(Strategy strategy, std::span<const Model> models, const Tensor& pool,
                            const RngStream& stream, const ScoreOptions& options = {});

/// Predictive set a strategy uses for its uncertainty (random uses softmax).
PredictiveSet strategy_predictive_set(Strategy strategy, std::span<const Model> models, const Tensor& inputs,
                                      const RngStream& stream, const ScoreOptions& options = {});

/// Dump of one record per pool sample: id, score, mean probs, member probs.
void write_prediction_dump(const std::string& path, const PredictiveSet& ps, const AcquisitionScore& score,
                           std::span<const std::size_t> sample_ids);

}  // namespace alforge
