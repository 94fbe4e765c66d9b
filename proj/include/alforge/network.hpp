#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alforge/dataset.hpp"
#include "alforge/keyvalue.hpp"
#include "alforge/rng.hpp"
#include "alforge/tensor.hpp"

namespace alforge {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Layer stack: [conv3x3 + relu] x conv_layers (one 2x2 max pool after
/// layer `pool_after`), flatten, [dense + relu + dropout] per fc width,
/// then a softmax class head and a logistic 4-output location head that
/// share the last hidden layer.
struct NetworkConfig {
  // Image-like input when input_channels > 0, flat vector otherwise.
  std::size_t input_channels = 0;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::size_t flat_dim = 0;

  std::size_t conv_layers = 0;
  std::size_t kernels_per_layer = 32;
  std::size_t pool_after = 0;  // 1-based conv layer index, 0 = no pooling
  std::vector<std::size_t> fc_widths;

  double dropout_rate = 0.5;
  std::size_t num_classes = 2;
  double loc_weight = 1.0;
  double weight_decay = 1e-4;
  AdamConfig adam;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;

  /// Full-size detector: 4 conv x 32 kernels on 2 x 100 x 100 inputs, one
  /// pool, 3 x 256 dense layers each followed by dropout 0.5, decay 1e-4.
  static NetworkConfig full_preset(std::size_t num_classes);
  /// Reduced instance with the same topology rules, sized for the input:
  /// 2 x 32 dense layers, dropout 0.2, 20 epochs, learning rate 3e-3, plus
  /// 2 conv x 8 kernels with one pool for C x H x W inputs.
  static NetworkConfig desk_preset(const Shape& input_shape, std::size_t num_classes);

  bool uses_conv() const { return input_channels > 0; }
  Shape input_shape() const;
  /// Flattened width entering the first dense layer.
  std::size_t flat_features() const;
  void validate() const;

  KeyValues to_key_values(const std::string& prefix = "net.") const;
  static NetworkConfig from_key_values(const KeyValues& kv, const std::string& prefix = "net.");
  /// Applies the keys present in `kv` on top of `base`.
  static NetworkConfig overlay(NetworkConfig base, const KeyValues& kv, const std::string& prefix = "net.");

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Parameter tensors in layer order: conv (W, b)..., dense (W, b)...,
/// class head (W, b), location head (W, b). Dense weights are [in x out].
struct NetworkParams {
  std::vector<Tensor> tensors;
  std::vector<std::string> names;
  /// True for weight tensors that carry L2 decay; biases are not decayed.
  std::vector<bool> decayed;

  std::size_t count() const { return tensors.size(); }
  bool all_finite() const;
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Same layout as NetworkParams::tensors.
using Gradients = std::vector<Tensor>;

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const NetworkParams& params);
};

struct Model {
  NetworkConfig config;
  NetworkParams params;
};

/// class_probs [n x C] rows sum to 1; loc [n x 4] in (0, 1).
struct Prediction {
  Tensor class_probs;
  Tensor loc;
};

/// Inverted-dropout masks, one [n x width] tensor per dense layer holding
/// either 0 or 1 / (1 - rate).
struct DropoutMasks {
  std::vector<Tensor> layers;
};

class ForwardMode {
 public:
  enum class Kind { Deterministic, Train, Replay };

  static ForwardMode deterministic() { return ForwardMode(Kind::Deterministic, nullptr, nullptr); }
  /// Draws fresh masks from `stream` (row by row, layer by layer).
  static ForwardMode train(RngStream& stream) { return ForwardMode(Kind::Train, &stream, nullptr); }
  /// Reuses previously drawn masks; batch size must match.
  static ForwardMode replay(const DropoutMasks& masks) { return ForwardMode(Kind::Replay, nullptr, &masks); }

  Kind kind() const { return kind_; }
  RngStream* stream() const { return stream_; }
  const DropoutMasks* masks() const { return masks_; }

 private:
  ForwardMode(Kind kind, RngStream* stream, const DropoutMasks* masks) : kind_(kind), stream_(stream), masks_(masks) {}
  Kind kind_;
  RngStream* stream_;
  const DropoutMasks* masks_;
};

/// Activations cached by a train/replay forward pass for backward().
struct ForwardTrace {
  bool has_masks = false;
  std::size_t batch = 0;
  // Conv path, indexed [layer][sample].
  std::vector<std::vector<Tensor>> conv_inputs;
  std::vector<std::vector<Tensor>> conv_pre;
  std::vector<std::vector<std::size_t>> pool_argmax;  // [sample]
  Shape pool_input_shape;
  Shape conv_output_shape;
  // Dense path.
  std::vector<Tensor> dense_inputs;
  std::vector<Tensor> dense_pre;
  DropoutMasks masks;
  Tensor hidden;
  Prediction prediction;
};

/// Supervision for one batch.
struct Targets {
  std::span<const std::int32_t> labels;
  const Tensor* locations = nullptr;  // [n x 4]
  std::span<const std::int32_t> loc_mask;
};

struct LossBreakdown {
  double cross_entropy = 0.0;
  double loc_mse = 0.0;  // masked mean over samples and the 4 components
  double decay = 0.0;    // weight_decay * ||W||^2 / 2
  double total = 0.0;
};

/// He-style init: weights ~ N(0, 2 / fan_in), biases zero.
NetworkParams init_params(const NetworkConfig& config, RngStream& stream);

Prediction forward(const Model& model, const Tensor& batch, const ForwardMode& mode, ForwardTrace* trace = nullptr);

/// CE + loc_weight * masked MSE, without the decay term.
LossBreakdown loss(const Prediction& pred, const Targets& targets, std::size_t num_classes, double loc_weight);
/// Full training objective including weight decay of `params`.
LossBreakdown loss(const Model& model, const Prediction& pred, const Targets& targets);

/// Analytic gradient of the full objective. `trace` must come from a train
/// or replay forward pass over the same batch.
Gradients backward(const Model& model, const ForwardTrace& trace, const Targets& targets);

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state, const AdamConfig& config);

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;
};

/// Fresh init, then `epochs` passes of reshuffled minibatch Adam.
TrainResult train(const Dataset& labeled, const NetworkConfig& config, const RngStream& stream);

/// Checkpoint directory: `network.cfg` plus one tensor file per parameter.
void save_model(const Model& model, const std::string& dir);
Model load_model(const std::string& dir);

}  // namespace alforge
