#include "alforge/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "alforge/kernels.hpp"
#include "alforge/tensor_io.hpp"

namespace alforge {

namespace {

// Sub-stream tags used by train().
constexpr std::uint64_t kTagInit = 0x1001;
constexpr std::uint64_t kTagShuffle = 0x1002;
constexpr std::uint64_t kTagDropout = 0x1003;

struct ConvGeometry {
  std::vector<Shape> layer_input;  // per conv layer, [C x H x W]
  Shape output;                    // after the last conv (and pool)
  Shape pool_input;
};

ConvGeometry conv_geometry(const NetworkConfig& c) {
  ConvGeometry g;
  Shape cur{c.input_channels, c.input_height, c.input_width};
  for (std::size_t l = 0; l < c.conv_layers; ++l) {
    g.layer_input.push_back(cur);
    if (cur[1] < 3 || cur[2] < 3) {
      throw DimensionError("conv layer " + std::to_string(l + 1) + " input " + shape_string(cur) + " is below 3x3");
    }
    cur = {c.kernels_per_layer, cur[1] - 2, cur[2] - 2};
    if (c.pool_after == l + 1) {
      if (cur[1] < 2 || cur[2] < 2) throw DimensionError("pool input " + shape_string(cur) + " is below 2x2");
      g.pool_input = cur;
      cur = {cur[0], cur[1] / 2, cur[2] / 2};
    }
  }
  g.output = cur;
  return g;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void add_bias_rows(Tensor& z, const Tensor& bias) {
  const std::size_t n = z.dim(0), w = z.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = z.raw() + i * w;
    for (std::size_t j = 0; j < w; ++j) row[j] += bias[j];
  }
}

Tensor column_sums(const Tensor& m) {
  const std::size_t n = m.dim(0), w = m.dim(1);
  Tensor s({w});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < w; ++j) s[j] += m.at(i, j);
  }
  return s;
}

Tensor sample_slice(const Tensor& batch, std::size_t i, const Shape& shape) {
  auto r = batch.row(i);
  return Tensor(shape, std::vector<double>(r.begin(), r.end()));
}

std::size_t dense_index(const NetworkConfig& c, std::size_t j) { return 2 * (c.conv_layers + j); }
std::size_t class_head_index(const NetworkConfig& c) { return 2 * (c.conv_layers + c.fc_widths.size()); }
std::size_t loc_head_index(const NetworkConfig& c) { return class_head_index(c) + 2; }

void check_targets(const Targets& t, std::size_t n, std::size_t num_classes) {
  if (t.labels.size() != n) throw DimensionError("label count does not match batch size");
  if (t.locations == nullptr || t.locations->shape() != Shape{n, kLocationOutputs}) {
    throw DimensionError("location targets must be [n x 4]");
  }
  if (t.loc_mask.size() != n) throw DimensionError("location mask length does not match batch size");
  for (auto y : t.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ContractError("label " + std::to_string(y) + " out of range [0, " + std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// NetworkConfig

NetworkConfig NetworkConfig::full_preset(std::size_t num_classes) {
  NetworkConfig c;
  c.input_channels = 2;
  c.input_height = 100;
  c.input_width = 100;
  c.conv_layers = 4;
  c.kernels_per_layer = 32;
  c.pool_after = 4;
  c.fc_widths = {256, 256, 256};
  c.dropout_rate = 0.5;
  c.weight_decay = 1e-4;
  c.num_classes = num_classes;
  return c;
}

NetworkConfig NetworkConfig::desk_preset(const Shape& input_shape, std::size_t num_classes) {
  NetworkConfig c;
  c.num_classes = num_classes;
  c.fc_widths = {32, 32};
  c.dropout_rate = 0.2;
  c.epochs = 20;
  c.adam.learning_rate = 3e-3;
  if (input_shape.size() == 3) {
    c.input_channels = input_shape[0];
    c.input_height = input_shape[1];
    c.input_width = input_shape[2];
    c.conv_layers = 2;
    c.kernels_per_layer = 8;
    c.pool_after = 2;
  } else if (input_shape.size() == 1) {
    c.flat_dim = input_shape[0];
  } else {
    throw DimensionError("desk preset needs a flat or C x H x W input, got " + shape_string(input_shape));
  }
  return c;
}

Shape NetworkConfig::input_shape() const {
  if (uses_conv()) return {input_channels, input_height, input_width};
  return {flat_dim};
}

std::size_t NetworkConfig::flat_features() const {
  if (!uses_conv()) return flat_dim;
  if (conv_layers == 0) return input_channels * input_height * input_width;
  return shape_size(conv_geometry(*this).output);
}

void NetworkConfig::validate() const {
  if (num_classes < 2) throw ContractError("num_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
  if (loc_weight < 0.0 || weight_decay < 0.0) throw ContractError("loc_weight and weight_decay must be non-negative");
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  for (std::size_t w : fc_widths) {
    if (w == 0) throw ContractError("dense widths must be positive");
  }
  if (uses_conv()) {
    if (input_height == 0 || input_width == 0) throw ContractError("image input needs height and width");
    if (conv_layers > 0 && kernels_per_layer == 0) throw ContractError("kernels_per_layer must be positive");
    if (pool_after > conv_layers) throw ContractError("pool_after exceeds conv_layers");
    conv_geometry(*this);
  } else {
    if (flat_dim == 0) throw ContractError("flat input needs flat_dim > 0");
    if (conv_layers != 0) throw ContractError("conv layers need an image-shaped input");
  }
  if (!(adam.learning_rate > 0.0) || adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0 ||
      !(adam.epsilon > 0.0)) {
    throw ContractError("invalid Adam hyper-parameters");
  }
}

KeyValues NetworkConfig::to_key_values(const std::string& p) const {
  KeyValues kv;
  kv[p + "input_channels"] = std::to_string(input_channels);
  kv[p + "input_height"] = std::to_string(input_height);
  kv[p + "input_width"] = std::to_string(input_width);
  kv[p + "flat_dim"] = std::to_string(flat_dim);
  kv[p + "conv_layers"] = std::to_string(conv_layers);
  kv[p + "kernels"] = std::to_string(kernels_per_layer);
  kv[p + "pool_after"] = std::to_string(pool_after);
  std::vector<std::string> widths;
  for (auto w : fc_widths) widths.push_back(std::to_string(w));
  kv[p + "fc_widths"] = join(widths, ",");
  kv[p + "dropout"] = format_double(dropout_rate);
  kv[p + "num_classes"] = std::to_string(num_classes);
  kv[p + "loc_weight"] = format_double(loc_weight);
  kv[p + "weight_decay"] = format_double(weight_decay);
  kv[p + "lr"] = format_double(adam.learning_rate);
  kv[p + "beta1"] = format_double(adam.beta1);
  kv[p + "beta2"] = format_double(adam.beta2);
  kv[p + "eps"] = format_double(adam.epsilon);
  kv[p + "epochs"] = std::to_string(epochs);
  kv[p + "batch_size"] = std::to_string(batch_size);
  return kv;
}

NetworkConfig NetworkConfig::overlay(NetworkConfig c, const KeyValues& kv, const std::string& p) {
  c.input_channels = kv_uint(kv, p + "input_channels", c.input_channels);
  c.input_height = kv_uint(kv, p + "input_height", c.input_height);
  c.input_width = kv_uint(kv, p + "input_width", c.input_width);
  c.flat_dim = kv_uint(kv, p + "flat_dim", c.flat_dim);
  c.conv_layers = kv_uint(kv, p + "conv_layers", c.conv_layers);
  c.kernels_per_layer = kv_uint(kv, p + "kernels", c.kernels_per_layer);
  c.pool_after = kv_uint(kv, p + "pool_after", c.pool_after);
  if (auto it = kv.find(p + "fc_widths"); it != kv.end()) c.fc_widths = parse_size_list(it->second, it->first);
  c.dropout_rate = kv_double(kv, p + "dropout", c.dropout_rate);
  c.num_classes = kv_uint(kv, p + "num_classes", c.num_classes);
  c.loc_weight = kv_double(kv, p + "loc_weight", c.loc_weight);
  c.weight_decay = kv_double(kv, p + "weight_decay", c.weight_decay);
  c.adam.learning_rate = kv_double(kv, p + "lr", c.adam.learning_rate);
  c.adam.beta1 = kv_double(kv, p + "beta1", c.adam.beta1);
  c.adam.beta2 = kv_double(kv, p + "beta2", c.adam.beta2);
  c.adam.epsilon = kv_double(kv, p + "eps", c.adam.epsilon);
  c.epochs = kv_uint(kv, p + "epochs", c.epochs);
  c.batch_size = kv_uint(kv, p + "batch_size", c.batch_size);
  return c;
}

NetworkConfig NetworkConfig::from_key_values(const KeyValues& kv, const std::string& p) {
  return overlay(NetworkConfig{}, kv, p);
}

// ---------------------------------------------------------------------------
// Parameters

bool NetworkParams::all_finite() const {
  return std::ranges::all_of(tensors, [](const Tensor& t) { return t.all_finite(); });
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
  AdamState s;
  for (const auto& t : params.tensors) {
    s.first_moment.emplace_back(t.shape());
    s.second_moment.emplace_back(t.shape());
  }
  return s;
}

NetworkParams init_params(const NetworkConfig& config, RngStream& stream) {
  config.validate();
  NetworkParams p;
  auto add = [&](const std::string& name, Shape wshape, std::size_t fan_in, std::size_t out) {
    Tensor w(std::move(wshape));
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w.data()) v = scale * stream.normal();
    p.tensors.push_back(std::move(w));
    p.names.push_back(name + ".weight");
    p.decayed.push_back(true);
    p.tensors.emplace_back(Shape{out});
    p.names.push_back(name + ".bias");
    p.decayed.push_back(false);
  };
  std::size_t channels = config.input_channels;
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    add("conv" + std::to_string(l), {config.kernels_per_layer, channels, 3, 3}, channels * 9, config.kernels_per_layer);
    channels = config.kernels_per_layer;
  }
  std::size_t width = config.flat_features();
  for (std::size_t j = 0; j < config.fc_widths.size(); ++j) {
    add("dense" + std::to_string(j), {width, config.fc_widths[j]}, width, config.fc_widths[j]);
    width = config.fc_widths[j];
  }
  add("class_head", {width, config.num_classes}, width, config.num_classes);
  add("loc_head", {width, kLocationOutputs}, width, kLocationOutputs);
  return p;
}

// ---------------------------------------------------------------------------
// Forward

Prediction forward(const Model& model, const Tensor& batch, const ForwardMode& mode, ForwardTrace* trace) {
  const NetworkConfig& c = model.config;
  const auto& P = model.params.tensors;
  const Shape in_shape = c.input_shape();
  if (batch.rank() != in_shape.size() + 1 || !std::equal(in_shape.begin(), in_shape.end(), batch.shape().begin() + 1)) {
    throw DimensionError("batch shape " + shape_string(batch.shape()) + " does not match network input " +
                         shape_string(in_shape));
  }
  if (P.size() != loc_head_index(c) + 2) throw ContractError("parameter count does not match the network config");
  const std::size_t n = batch.dim(0);
  if (mode.kind() == ForwardMode::Kind::Train && mode.stream() == nullptr) {
    throw ContractError("train mode needs a random stream");
  }
  if (mode.kind() == ForwardMode::Kind::Replay) {
    const DropoutMasks* m = mode.masks();
    if (m == nullptr || m->layers.size() != c.fc_widths.size()) throw ContractError("replay masks do not match layers");
  }
  if (trace) {
    *trace = ForwardTrace{};
    trace->batch = n;
    trace->has_masks = mode.kind() != ForwardMode::Kind::Deterministic;
  }

  Tensor h;
  if (c.uses_conv() && c.conv_layers > 0) {
    const ConvGeometry geo = conv_geometry(c);
    const std::size_t flat = shape_size(geo.output);
    h = Tensor({n, flat});
    if (trace) {
      trace->conv_inputs.assign(c.conv_layers, std::vector<Tensor>(n));
      trace->conv_pre.assign(c.conv_layers, std::vector<Tensor>(n));
      trace->pool_argmax.assign(n, {});
      trace->pool_input_shape = geo.pool_input;
      trace->conv_output_shape = geo.output;
    }
    for (std::size_t i = 0; i < n; ++i) {
      Tensor cur = sample_slice(batch, i, in_shape);
      for (std::size_t l = 0; l < c.conv_layers; ++l) {
        Tensor z = kernels::conv2d_valid(cur, P[2 * l], P[2 * l + 1]);
        if (trace) {
          trace->conv_inputs[l][i] = std::move(cur);
          trace->conv_pre[l][i] = z;
        }
        for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
        if (c.pool_after == l + 1) {
          kernels::PoolResult pr = kernels::maxpool2d(z);
          if (trace) trace->pool_argmax[i] = std::move(pr.argmax);
          z = std::move(pr.output);
        }
        cur = std::move(z);
      }
      std::ranges::copy(cur.data(), h.row(i).begin());
    }
  } else {
    h = batch.reshaped({n, c.flat_features()});
  }

  const double keep = 1.0 - c.dropout_rate;
  const double scale = 1.0 / keep;
  for (std::size_t j = 0; j < c.fc_widths.size(); ++j) {
    const std::size_t wi = dense_index(c, j);
    Tensor z = kernels::matmul(h, P[wi]);
    add_bias_rows(z, P[wi + 1]);
    Tensor a = z;
    for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
    if (mode.kind() != ForwardMode::Kind::Deterministic) {
      Tensor mask;
      if (mode.kind() == ForwardMode::Kind::Train) {
        mask = Tensor(a.shape());
        RngStream& s = *mode.stream();
        for (double& m : mask.data()) m = s.uniform() >= c.dropout_rate ? scale : 0.0;
      } else {
        mask = mode.masks()->layers[j];
        if (mask.shape() != a.shape()) throw DimensionError("replay mask shape does not match activations");
      }
      for (std::size_t k = 0; k < a.size(); ++k) a[k] *= mask[k];
      if (trace) trace->masks.layers.push_back(std::move(mask));
    }
    if (trace) {
      trace->dense_inputs.push_back(std::move(h));
      trace->dense_pre.push_back(std::move(z));
    }
    h = std::move(a);
  }

  const std::size_t ci = class_head_index(c);
  Tensor logits = kernels::matmul(h, P[ci]);
  add_bias_rows(logits, P[ci + 1]);
  Prediction pred{kernels::softmax(logits), kernels::matmul(h, P[ci + 2])};
  add_bias_rows(pred.loc, P[ci + 3]);
  for (double& v : pred.loc.data()) v = sigmoid(v);
  require_finite(pred.class_probs, "class probabilities");
  require_finite(pred.loc, "location output");
  if (trace) {
    trace->hidden = std::move(h);
    trace->prediction = pred;
  }
  return pred;
}

// ---------------------------------------------------------------------------
// Loss and gradients

LossBreakdown loss(const Prediction& pred, const Targets& targets, std::size_t num_classes, double loc_weight) {
  const std::size_t n = pred.class_probs.dim(0);
  check_targets(targets, n, num_classes);
  if (pred.class_probs.dim(1) != num_classes) throw DimensionError("prediction class count mismatch");
  LossBreakdown out;
  if (n == 0) return out;
  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = pred.class_probs.at(i, static_cast<std::size_t>(targets.labels[i]));
    ce -= std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  out.cross_entropy = ce / static_cast<double>(n);
  std::size_t masked = 0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!targets.loc_mask[i]) continue;
    ++masked;
    for (std::size_t k = 0; k < kLocationOutputs; ++k) {
      const double d = pred.loc.at(i, k) - targets.locations->at(i, k);
      sq += d * d;
    }
  }
  if (masked > 0) out.loc_mse = sq / static_cast<double>(masked * kLocationOutputs);
  out.total = out.cross_entropy + loc_weight * out.loc_mse;
  return out;
}

LossBreakdown loss(const Model& model, const Prediction& pred, const Targets& targets) {
  LossBreakdown out = loss(pred, targets, model.config.num_classes, model.config.loc_weight);
  double sq = 0.0;
  for (std::size_t t = 0; t < model.params.count(); ++t) {
    if (!model.params.decayed[t]) continue;
    for (double v : model.params.tensors[t].data()) sq += v * v;
  }
  out.decay = 0.5 * model.config.weight_decay * sq;
  out.total += out.decay;
  return out;
}

Gradients backward(const Model& model, const ForwardTrace& trace, const Targets& targets) {
  if (!trace.has_masks) throw ContractError("backward needs a preceding train-mode forward pass");
  const NetworkConfig& c = model.config;
  const auto& P = model.params.tensors;
  const std::size_t n = trace.batch;
  check_targets(targets, n, c.num_classes);
  Gradients g(P.size());

  // Class head: d(mean CE)/d(logits) = (p - onehot) / n.
  const Tensor& probs = trace.prediction.class_probs;
  Tensor dlogits = probs;
  for (std::size_t i = 0; i < n; ++i) {
    dlogits.at(i, static_cast<std::size_t>(targets.labels[i])) -= 1.0;
  }
  const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (double& v : dlogits.data()) v *= inv_n;

  // Location head through the logistic squashing; background rows stay zero.
  const Tensor& loc = trace.prediction.loc;
  Tensor dloc({n, kLocationOutputs});
  const auto masked = static_cast<std::size_t>(std::ranges::count_if(targets.loc_mask, [](auto m) { return m != 0; }));
  if (masked > 0) {
    const double coef = c.loc_weight * 2.0 / static_cast<double>(masked * kLocationOutputs);
    for (std::size_t i = 0; i < n; ++i) {
      if (!targets.loc_mask[i]) continue;
      for (std::size_t k = 0; k < kLocationOutputs; ++k) {
        const double y = loc.at(i, k);
        dloc.at(i, k) = coef * (y - targets.locations->at(i, k)) * y * (1.0 - y);
      }
    }
  }

  const std::size_t ci = class_head_index(c);
  g[ci] = kernels::matmul_tn(trace.hidden, dlogits);
  g[ci + 1] = column_sums(dlogits);
  g[ci + 2] = kernels::matmul_tn(trace.hidden, dloc);
  g[ci + 3] = column_sums(dloc);

  Tensor dh = kernels::matmul_nt(dlogits, P[ci]);
  {
    const Tensor dh_loc = kernels::matmul_nt(dloc, P[ci + 2]);
    for (std::size_t k = 0; k < dh.size(); ++k) dh[k] += dh_loc[k];
  }

  const bool need_input_grad = c.uses_conv() && c.conv_layers > 0;
  for (std::size_t jj = c.fc_widths.size(); jj-- > 0;) {
    const std::size_t wi = dense_index(c, jj);
    const Tensor& mask = trace.masks.layers[jj];
    const Tensor& z = trace.dense_pre[jj];
    for (std::size_t k = 0; k < dh.size(); ++k) dh[k] = z[k] > 0.0 ? dh[k] * mask[k] : 0.0;
    g[wi] = kernels::matmul_tn(trace.dense_inputs[jj], dh);
    g[wi + 1] = column_sums(dh);
    if (jj > 0 || need_input_grad) dh = kernels::matmul_nt(dh, P[wi]);
  }

  if (need_input_grad) {
    for (std::size_t l = 0; l < c.conv_layers; ++l) {
      g[2 * l] = Tensor(P[2 * l].shape());
      g[2 * l + 1] = Tensor(P[2 * l + 1].shape());
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto r = dh.row(i);
      Tensor grad(trace.conv_output_shape, std::vector<double>(r.begin(), r.end()));
      for (std::size_t l = c.conv_layers; l-- > 0;) {
        if (c.pool_after == l + 1) {
          grad = kernels::maxpool2d_backward(grad, trace.pool_argmax[i], trace.pool_input_shape);
        }
        const Tensor& z = trace.conv_pre[l][i];
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = z[k] > 0.0 ? grad[k] : 0.0;
        kernels::ConvGradients cg = kernels::conv2d_valid_backward(trace.conv_inputs[l][i], P[2 * l], grad);
        for (std::size_t k = 0; k < cg.kernels.size(); ++k) g[2 * l][k] += cg.kernels[k];
        for (std::size_t k = 0; k < cg.bias.size(); ++k) g[2 * l + 1][k] += cg.bias[k];
        if (l > 0) grad = std::move(cg.input);
      }
    }
  }

  if (c.weight_decay != 0.0) {
    for (std::size_t t = 0; t < P.size(); ++t) {
      if (!model.params.decayed[t]) continue;
      for (std::size_t k = 0; k < P[t].size(); ++k) g[t][k] += c.weight_decay * P[t][k];
    }
  }
  return g;
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.count() || state.first_moment.size() != params.count()) {
    throw ContractError("adam_step: parameter, gradient and moment counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.count(); ++p) {
    Tensor& w = params.tensors[p];
    const Tensor& gr = grads[p];
    if (gr.size() != w.size()) throw DimensionError("adam_step: gradient shape mismatch for " + params.names[p]);
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gr[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gr[k] * gr[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
  if (!params.all_finite()) throw NumericError("non-finite parameter after Adam step");
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const Dataset& labeled, const NetworkConfig& config, const RngStream& stream) {
  config.validate();
  const std::size_t n = labeled.size();
  if (n == 0) throw ContractError("cannot train on an empty labeled set");
  if (labeled.feature_shape() != config.input_shape()) {
    throw DimensionError("dataset feature shape " + shape_string(labeled.feature_shape()) +
                         " does not match network input " + shape_string(config.input_shape()));
  }
  RngStream init_stream = stream.substream(kTagInit);
  TrainResult result{Model{config, init_params(config, init_stream)}, {}};
  AdamState adam = AdamState::zeros_like(result.model.params);

  std::vector<std::size_t> order(n);
  ForwardTrace trace;
  Shape bshape = labeled.features.shape();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle = stream.substream(kTagShuffle, epoch);
    rng_shuffle(shuffle, order);
    RngStream dropout = stream.substream(kTagDropout, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> rows(order.data() + start, count);
      bshape[0] = count;
      Tensor x(bshape);
      Tensor loc({count, kLocationOutputs});
      std::vector<std::int32_t> labels(count), mask(count);
      for (std::size_t r = 0; r < count; ++r) {
        const std::size_t i = rows[r];
        std::ranges::copy(labeled.features.row(i), x.row(r).begin());
        std::ranges::copy(labeled.locations.row(i), loc.row(r).begin());
        labels[r] = labeled.labels[i];
        mask[r] = labeled.loc_mask[i];
      }
      const Targets targets{labels, &loc, mask};
      const Prediction pred = forward(result.model, x, ForwardMode::train(dropout), &trace);
      epoch_loss += loss(result.model, pred, targets).total * static_cast<double>(count);
      const Gradients grads = backward(result.model, trace, targets);
      adam_step(result.model.params, grads, adam, config.adam);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NumericError("training loss became non-finite");
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(const Model& model, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  KeyValues kv = model.config.to_key_values();
  kv["params.count"] = std::to_string(model.params.count());
  for (std::size_t t = 0; t < model.params.count(); ++t) {
    char key[32];
    std::snprintf(key, sizeof key, "params.%02zu", t);
    kv[key] = model.params.names[t] + (model.params.decayed[t] ? " decayed" : "");
    write_tensor_file((fs::path(dir) / (std::string("param_") + (key + 7) + ".bin")).string(), model.params.tensors[t]);
  }
  std::ofstream out(fs::path(dir) / "network.cfg");
  out << "# alforge network checkpoint\n" << format_key_values(kv);
  if (!out) throw std::runtime_error("cannot write checkpoint header in " + dir);
}

Model load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  const KeyValues kv = read_key_values((fs::path(dir) / "network.cfg").string());
  Model m{NetworkConfig::from_key_values(kv), {}};
  const std::size_t count = kv_uint(kv, "params.count", 0);
  for (std::size_t t = 0; t < count; ++t) {
    char key[32];
    std::snprintf(key, sizeof key, "params.%02zu", t);
    std::string name = kv_string(kv, key, "");
    bool decayed = false;
    if (const auto sp = name.find(' '); sp != std::string::npos) {
      decayed = name.substr(sp + 1) == "decayed";
      name = name.substr(0, sp);
    }
    m.params.tensors.push_back(read_float_tensor_file((fs::path(dir) / (std::string("param_") + (key + 7) + ".bin")).string()));
    m.params.names.push_back(name);
    m.params.decayed.push_back(decayed);
  }
  RngStream probe(0, 0);
  const NetworkParams expected = init_params(m.config, probe);
  if (expected.count() != m.params.count()) throw ConfigError("checkpoint parameter count does not match config");
  for (std::size_t t = 0; t < count; ++t) {
    if (expected.tensors[t].shape() != m.params.tensors[t].shape()) {
      throw ConfigError("checkpoint tensor " + m.params.names[t] + " has the wrong shape");
    }
  }
  return m;
}

}  // namespace alforge
