#include "alforge/uncertainty.hpp"

#include <cmath>
#include <exception>

#include "alforge/csv.hpp"
#include "alforge/keyvalue.hpp"

namespace alforge {

namespace {

constexpr std::string_view kStrategyNames[] = {"random",     "softmax-entropy", "mc-entropy",
                                               "mc-mi",      "ens-entropy",     "ens-mi"};

double row_entropy(const double* p, std::size_t c) {
  double h = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
  }
  return h;
}

void check_rows(const double* p, std::size_t c, std::size_t row) {
  double s = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (!(p[j] >= 0.0)) throw ContractError("negative or NaN probability in row " + std::to_string(row));
    s += p[j];
  }
  if (std::abs(s - 1.0) > 1e-6) {
    throw ContractError("probability row " + std::to_string(row) + " sums to " + format_double(s));
  }
}

std::vector<double> entropy_of_members(const PredictiveSet& ps, std::size_t member) {
  const std::size_t n = ps.samples(), c = ps.classes();
  std::vector<double> h(n);
  const double* base = ps.member_probs.raw() + member * n * c;
  for (std::size_t i = 0; i < n; ++i) h[i] = row_entropy(base + i * c, c);
  return h;
}

}  // namespace

std::string_view strategy_name(Strategy s) { return kStrategyNames[static_cast<int>(s)]; }

Strategy parse_strategy(std::string_view name) {
  for (int i = 0; i < 6; ++i) {
    if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
  }
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected random, softmax-entropy, mc-entropy, mc-mi, ens-entropy or ens-mi)");
}

Estimator estimator_of(Strategy s) {
  switch (s) {
    case Strategy::McEntropy:
    case Strategy::McMi:
      return Estimator::McDropout;
    case Strategy::EnsEntropy:
    case Strategy::EnsMi:
      return Estimator::Ensemble;
    default:
      return Estimator::Softmax;
  }
}

bool uses_mutual_information(Strategy s) { return s == Strategy::McMi || s == Strategy::EnsMi; }

std::size_t models_per_step(Strategy s, std::size_t ensemble_size) {
  return estimator_of(s) == Estimator::Ensemble ? ensemble_size : 1;
}

PredictiveSet PredictiveSet::from_members(Tensor member_probs) {
  if (member_probs.rank() != 3 || member_probs.dim(0) == 0) {
    throw DimensionError("member probabilities must be [M x n x C] with M >= 1, got " +
                         shape_string(member_probs.shape()));
  }
  const std::size_t m = member_probs.dim(0), nc = member_probs.dim(1) * member_probs.dim(2);
  Tensor mean({member_probs.dim(1), member_probs.dim(2)});
  const double* p = member_probs.raw();
  const double inv = static_cast<double>(m);
  for (std::size_t k = 0; k < nc; ++k) {
    const double first = p[k];
    double dev = 0.0;
    for (std::size_t t = 1; t < m; ++t) dev += p[t * nc + k] - first;
    mean[k] = first + dev / inv;
  }
  return PredictiveSet{std::move(member_probs), std::move(mean)};
}

PredictiveSet softmax_single(const Model& model, const Tensor& inputs) {
  Tensor probs = forward(model, inputs, ForwardMode::deterministic()).class_probs;
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  return PredictiveSet::from_members(std::move(probs).reshaped({1, n, c}));
}

PredictiveSet mc_dropout_predict(const Model& model, const Tensor& inputs, std::size_t passes, const RngStream& stream,
                                 std::span<const std::size_t> sample_ids, bool parallel) {
  if (passes == 0) throw ContractError("mc_dropout_predict needs at least one pass");
  if (inputs.rank() < 2) throw DimensionError("inputs must carry a leading sample axis");
  const std::size_t n = inputs.dim(0), c = model.config.num_classes;
  if (!sample_ids.empty() && sample_ids.size() != n) throw ContractError("sample_ids length does not match inputs");
  Tensor members({passes, n, c});
  Shape rep_shape = inputs.shape();
  rep_shape[0] = passes;
  const std::size_t row = inputs.row_size();

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      Tensor replicated(rep_shape);
      const auto src = inputs.row(i);
      for (std::size_t t = 0; t < passes; ++t) std::copy(src.begin(), src.end(), replicated.raw() + t * row);
      RngStream s = stream.substream(sample_ids.empty() ? i : sample_ids[i]);
      const Prediction pred = forward(model, replicated, ForwardMode::train(s));
      for (std::size_t t = 0; t < passes; ++t) {
        std::copy_n(pred.class_probs.raw() + t * c, c, members.raw() + (t * n + i) * c);
      }
    } catch (...) {
#pragma omp critical(alforge_mc_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return PredictiveSet::from_members(std::move(members));
}

PredictiveSet ensemble_predict(std::span<const Model> models, const Tensor& inputs) {
  if (models.empty()) throw ContractError("ensemble_predict needs at least one member");
  for (const Model& m : models) {
    if (!(m.config == models[0].config)) throw ContractError("ensemble members have different network configs");
  }
  const std::size_t e = models.size();
  std::vector<Tensor> outputs(e);
  for (std::size_t k = 0; k < e; ++k) outputs[k] = forward(models[k], inputs, ForwardMode::deterministic()).class_probs;
  const std::size_t n = outputs[0].dim(0), c = outputs[0].dim(1);
  Tensor members({e, n, c});
  for (std::size_t k = 0; k < e; ++k) std::copy_n(outputs[k].raw(), n * c, members.raw() + k * n * c);
  return PredictiveSet::from_members(std::move(members));
}

std::vector<double> shannon_entropy(const Tensor& probs) {
  if (probs.rank() != 2) throw DimensionError("entropy expects an [n x C] matrix");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    check_rows(probs.raw() + i * c, c, i);
    h[i] = row_entropy(probs.raw() + i * c, c);
  }
  return h;
}

MutualInformation mutual_information(const PredictiveSet& ps) {
  const std::size_t m = ps.members(), n = ps.samples();
  MutualInformation out;
  const std::vector<double> total = shannon_entropy(ps.mean_probs);
  // Mean member entropy, accumulated the same way as the member mean.
  const std::vector<double> first = entropy_of_members(ps, 0);
  std::vector<double> dev(n, 0.0);
  for (std::size_t t = 1; t < m; ++t) {
    const std::vector<double> h = entropy_of_members(ps, t);
    for (std::size_t i = 0; i < n; ++i) dev[i] += h[i] - first[i];
  }
  out.raw.resize(n);
  out.score.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = first[i] + dev[i] / static_cast<double>(m);
    out.raw[i] = total[i] - expected;
    out.score[i] = out.raw[i] > 0.0 ? out.raw[i] : 0.0;
  }
  return out;
}

PredictiveSet strategy_predictive_set(Strategy strategy, std::span<const Model> models, const Tensor& inputs,
                                      const RngStream& stream, const ScoreOptions& options) {
  switch (estimator_of(strategy)) {
    case Estimator::Ensemble:
      return ensemble_predict(models, inputs);
    case Estimator::McDropout:
      if (models.size() != 1) throw ContractError(std::string(strategy_name(strategy)) + " needs exactly one model");
      return mc_dropout_predict(models[0], inputs, options.mc_passes, stream, options.sample_ids, options.parallel);
    case Estimator::Softmax:
      break;
  }
  if (models.size() != 1) throw ContractError(std::string(strategy_name(strategy)) + " needs exactly one model");
  return softmax_single(models[0], inputs);
}

AcquisitionScore score_pool(Strategy strategy, std::span<const Model> models, const Tensor& pool,
                            const RngStream& stream, const ScoreOptions& options) {
  AcquisitionScore out;
  out.strategy = strategy;
  if (strategy == Strategy::Random) {
    const std::size_t n = pool.rank() ? pool.dim(0) : 0;
    RngStream s = stream;
    out.score = rng_uniform(s, n);
    out.raw = out.score;
    return out;
  }
  const PredictiveSet ps = strategy_predictive_set(strategy, models, pool, stream, options);
  if (uses_mutual_information(strategy)) {
    MutualInformation mi = mutual_information(ps);
    out.score = std::move(mi.score);
    out.raw = std::move(mi.raw);
  } else {
    out.score = shannon_entropy(ps.mean_probs);
    out.raw = out.score;
  }
  return out;
}

void write_prediction_dump(const std::string& path, const PredictiveSet& ps, const AcquisitionScore& score,
                           std::span<const std::size_t> sample_ids) {
  const std::size_t n = ps.samples(), c = ps.classes(), m = ps.members();
  std::vector<std::string> header = {"sample", "score", "raw_score"};
  for (std::size_t j = 0; j < c; ++j) header.push_back("mean_p" + std::to_string(j));
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t j = 0; j < c; ++j) header.push_back("m" + std::to_string(t) + "_p" + std::to_string(j));
  }
  CsvWriter w(header);
  for (std::size_t i = 0; i < n; ++i) {
    w.cell(sample_ids.empty() ? i : sample_ids[i]).cell(score.score.at(i)).cell(score.raw.at(i));
    for (std::size_t j = 0; j < c; ++j) w.cell(ps.mean_probs.at(i, j));
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t j = 0; j < c; ++j) w.cell(ps.member_probs[(t * n + i) * c + j]);
    }
    w.end_row();
  }
  w.save(path);
}

}  // namespace alforge
