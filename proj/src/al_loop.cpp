#include "alforge/al_loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

namespace alforge {

namespace {

constexpr std::string_view kStopRuleNames[] = {"max-steps", "convergence", "target"};

// Features from the pool, targets from the annotator.
Dataset labeled_batch(const Dataset& train, const Oracle& oracle, const PoolState& pool,
                      std::span<const std::size_t> indices) {
  OracleAnswer answer = oracle_label(oracle, pool, indices);
  Dataset batch = train.subset(indices);
  batch.labels = std::move(answer.labels);
  batch.locations = std::move(answer.locations);
  batch.loc_mask = std::move(answer.loc_mask);
  return batch;
}

struct Evaluation {
  MetricsRecord record;
  StepDiagnostics diagnostics;
};

Evaluation evaluate(std::span<const Model> models, const Dataset& test, const LoopConfig& config,
                    const RngStream& root, std::size_t step, bool parallel) {
  Evaluation ev;
  // Accuracy and location error come from one deterministic network:
  // the plain model for MC strategies, member 0 for ensembles.
  const Prediction det = forward(models[0], test.features, ForwardMode::deterministic());
  ev.record.accuracy = accuracy(argmax_rows(det.class_probs), test.labels);
  ev.record.loc_mse = loc_mse(det.loc, test.locations, test.loc_mask);

  const Strategy s = config.strategy == Strategy::Random ? Strategy::SoftmaxEntropy : config.strategy;
  std::vector<std::size_t> ids(test.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  ScoreOptions opts{config.mc_passes, ids, parallel};
  const PredictiveSet ps = strategy_predictive_set(s, models, test.features, root.substream(stream_tag::kEval, step), opts);
  ev.diagnostics.calibration = calibration(ps.mean_probs, test.labels, config.calibration_bins);
  const std::vector<double> losses = cross_entropy_losses(ps.mean_probs, test.labels);
  const std::vector<double> unc = uses_mutual_information(s) ? mutual_information(ps).score : shannon_entropy(ps.mean_probs);
  ev.diagnostics.sparsification = sparsification(losses, unc, config.sparsification_steps);
  ev.record.calibration_error = ev.diagnostics.calibration.error;
  ev.record.calibration_error_weighted = ev.diagnostics.calibration.weighted_error;
  ev.record.error_sum = ev.diagnostics.sparsification.error_sum;
  return ev;
}

}  // namespace

std::string_view stop_rule_name(StopRule r) { return kStopRuleNames[static_cast<int>(r)]; }

StopRule parse_stop_rule(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (kStopRuleNames[i] == name) return static_cast<StopRule>(i);
  }
  throw ConfigError("unknown stop rule '" + std::string(name) + "' (expected max-steps, convergence or target)");
}

void LoopConfig::validate() const {
  if (query_batch < 1) throw ConfigError("query batch must be at least 1");
  if (seed_per_class < 1) throw ConfigError("seed set needs at least 1 sample per class");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (ensemble_size < 1) throw ConfigError("ensemble size must be at least 1");
  if (mc_passes < 1) throw ConfigError("mc passes must be at least 1");
  if (calibration_bins < 2) throw ConfigError("calibration needs at least 2 bins");
  if (sparsification_steps < 2) throw ConfigError("sparsification needs at least 2 steps");
  if (convergence_window < 1) throw ConfigError("convergence window must be at least 1");
}

KeyValues LoopConfig::to_key_values(const std::string& p) const {
  return {
      {p + "seed_per_class", std::to_string(seed_per_class)},
      {p + "query", std::to_string(query_batch)},
      {p + "max_steps", std::to_string(max_steps)},
      {p + "strategy", std::string(strategy_name(strategy))},
      {p + "repetitions", std::to_string(repetitions)},
      {p + "stop_rule", std::string(stop_rule_name(stop_rule))},
      {p + "conv_epsilon", format_double(convergence_epsilon)},
      {p + "conv_window", std::to_string(convergence_window)},
      {p + "target_accuracy", format_double(target_accuracy)},
      {p + "ensemble", std::to_string(ensemble_size)},
      {p + "mc_passes", std::to_string(mc_passes)},
      {p + "calib_bins", std::to_string(calibration_bins)},
      {p + "sparsification_steps", std::to_string(sparsification_steps)},
  };
}

LoopConfig LoopConfig::overlay(LoopConfig c, const KeyValues& kv, const std::string& p) {
  c.seed_per_class = kv_uint(kv, p + "seed_per_class", c.seed_per_class);
  c.query_batch = kv_uint(kv, p + "query", c.query_batch);
  c.max_steps = kv_uint(kv, p + "max_steps", c.max_steps);
  if (kv.contains(p + "strategy")) c.strategy = parse_strategy(kv.at(p + "strategy"));
  c.repetitions = kv_uint(kv, p + "repetitions", c.repetitions);
  if (kv.contains(p + "stop_rule")) c.stop_rule = parse_stop_rule(kv.at(p + "stop_rule"));
  c.convergence_epsilon = kv_double(kv, p + "conv_epsilon", c.convergence_epsilon);
  c.convergence_window = kv_uint(kv, p + "conv_window", c.convergence_window);
  c.target_accuracy = kv_double(kv, p + "target_accuracy", c.target_accuracy);
  c.ensemble_size = kv_uint(kv, p + "ensemble", c.ensemble_size);
  c.mc_passes = kv_uint(kv, p + "mc_passes", c.mc_passes);
  c.calibration_bins = kv_uint(kv, p + "calib_bins", c.calibration_bins);
  c.sparsification_steps = kv_uint(kv, p + "sparsification_steps", c.sparsification_steps);
  return c;
}

void PoolState::move_to_labeled(std::span<const std::size_t> indices) {
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::ranges::sort(sorted);
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ContractError("query batch contains a duplicate index");
  }
  std::vector<std::size_t> remaining;
  remaining.reserve(unlabeled.size());
  std::ranges::set_difference(unlabeled, sorted, std::back_inserter(remaining));
  if (remaining.size() + sorted.size() != unlabeled.size()) {
    throw ContractError("query batch contains an index that is not unlabeled");
  }
  unlabeled = std::move(remaining);
  std::vector<std::size_t> merged;
  merged.reserve(labeled.size() + sorted.size());
  std::ranges::merge(labeled, sorted, std::back_inserter(merged));
  labeled = std::move(merged);
}

void PoolState::check_partition(std::size_t n) const {
  if (labeled.size() + unlabeled.size() != n) throw ContractError("pool partition does not cover the pool");
  std::vector<char> seen(n, 0);
  for (const auto* set : {&labeled, &unlabeled}) {
    if (!std::ranges::is_sorted(*set)) throw ContractError("pool index set is not ordered");
    for (std::size_t i : *set) {
      if (i >= n || seen[i]) throw ContractError("pool partition overlaps at index " + std::to_string(i));
      seen[i] = 1;
    }
  }
}

PoolState init_seed_set(const Dataset& dataset, std::size_t per_class, const RngStream& stream) {
  if (dataset.size() == 0) throw ContractError("cannot seed from an empty dataset");
  const std::size_t c = dataset.num_classes();
  std::vector<std::vector<std::size_t>> by_class(c);
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  PoolState pool;
  pool.shortfall.assign(c, 0);
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < c; ++k) {
    if (by_class[k].empty()) {
      throw ContractError("class '" + dataset.class_names[k] + "' has no training samples");
    }
    RngStream s = stream.substream(k);
    rng_shuffle(s, by_class[k]);
    const std::size_t take = std::min(per_class, by_class[k].size());
    pool.shortfall[k] = per_class - take;
    chosen.insert(chosen.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(take));
  }
  pool.unlabeled.resize(dataset.size());
  std::iota(pool.unlabeled.begin(), pool.unlabeled.end(), std::size_t{0});
  pool.move_to_labeled(chosen);
  return pool;
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::span<const std::size_t> ids, std::size_t k) {
  if (scores.size() != ids.size()) throw ContractError("select_top_k: scores and ids differ in length");
  if (k > scores.size()) {
    throw ContractError("cannot select " + std::to_string(k) + " of " + std::to_string(scores.size()) + " samples");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ContractError("select_top_k: NaN score");
  }
  std::vector<std::size_t> pos(scores.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  };
  std::partial_sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k), pos.end(), better);
  pos.resize(k);
  return pos;
}

OracleAnswer oracle_label(const Oracle& oracle, const PoolState& pool, std::span<const std::size_t> indices) {
  if (oracle.truth == nullptr) throw ContractError("oracle has no ground truth");
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::ranges::sort(sorted);
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ContractError("oracle asked for the same index twice");
  }
  for (std::size_t i : sorted) {
    if (!std::ranges::binary_search(pool.unlabeled, i)) {
      throw ContractError("oracle asked for index " + std::to_string(i) + ", which is not unlabeled");
    }
  }
  const Dataset& d = *oracle.truth;
  OracleAnswer a;
  a.locations = Tensor({indices.size(), kLocationOutputs});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    a.labels.push_back(d.labels.at(i));
    a.loc_mask.push_back(d.loc_mask.at(i));
    std::ranges::copy(d.locations.row(i), a.locations.row(r).begin());
  }
  return a;
}

bool stop_condition(std::span<const MetricsRecord> history, const LoopConfig& config) {
  if (history.empty()) throw ContractError("stop_condition needs at least one record");
  const MetricsRecord& last = history.back();
  if (last.step >= config.max_steps) return true;
  switch (config.stop_rule) {
    case StopRule::MaxSteps:
      return false;
    case StopRule::Convergence: {
      const std::size_t w = config.convergence_window;
      if (history.size() <= w) return false;
      return last.accuracy - history[history.size() - 1 - w].accuracy < config.convergence_epsilon;
    }
    case StopRule::Target:
      return last.accuracy >= config.target_accuracy;
  }
  return false;
}

std::vector<Model> train_models(const Dataset& labeled, const NetworkConfig& net, Strategy strategy,
                                std::size_t ensemble_size, const RngStream& root, std::size_t step, bool parallel) {
  const std::size_t e = models_per_step(strategy, ensemble_size);
  std::vector<Model> models(e);
  const RngStream step_stream = root.substream(stream_tag::kTrain, step);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) if (parallel && e > 1)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(e); ++m) {
    try {
      models[static_cast<std::size_t>(m)] = train(labeled, net, step_stream.substream(static_cast<std::uint64_t>(m))).model;
    } catch (...) {
#pragma omp critical(alforge_train_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return models;
}

LoopResult run_loop(const Dataset& train, const Dataset& test, const LoopConfig& config, const NetworkConfig& net,
                    std::uint64_t master_seed, const LoopOptions& options) {
  config.validate();
  train.validate();
  test.validate();
  if (train.class_names != test.class_names) throw ContractError("train and test sets have different classes");
  if (net.num_classes != train.num_classes()) throw ContractError("network class count does not match the dataset");
  using Clock = std::chrono::steady_clock;

  const RngStream root(master_seed, 0);
  const Oracle oracle{&train};
  LoopResult out;
  PoolState& pool = out.pool;
  pool = init_seed_set(train, config.seed_per_class, root.substream(stream_tag::kSeedSet));
  out.pool_class_counts = train.class_counts(pool.unlabeled);
  const std::vector<std::size_t> seed = pool.labeled;
  PoolState before_seed;
  before_seed.unlabeled.resize(train.size());
  std::iota(before_seed.unlabeled.begin(), before_seed.unlabeled.end(), std::size_t{0});
  Dataset labeled = labeled_batch(train, oracle, before_seed, seed);

  auto finish_step = [&](std::size_t step, const std::vector<Model>& models, std::span<const std::size_t> queried,
                         Clock::time_point started) {
    pool.check_partition(train.size());
    Evaluation ev = evaluate(models, test, config, root, step, options.parallel);
    ev.record.step = step;
    ev.record.labeled_count = pool.labeled.size();
    ev.record.queried_per_class = train.class_counts(queried);
    ev.record.wall_time_s = std::chrono::duration<double>(Clock::now() - started).count();
    out.records.push_back(ev.record);
    out.diagnostics.push_back(std::move(ev.diagnostics));
    if (options.on_step) options.on_step(out.records.back(), pool);
  };

  auto started = Clock::now();
  std::vector<Model> models =
      train_models(labeled, net, config.strategy, config.ensemble_size, root, 0, options.parallel);
  finish_step(0, models, seed, started);

  for (std::size_t step = 1; !pool.unlabeled.empty() && !stop_condition(out.records, config); ++step) {
    started = Clock::now();
    const std::size_t k = std::min(config.query_batch, pool.unlabeled.size());
    const Tensor pool_x = train.subset(pool.unlabeled).features;
    ScoreOptions opts{config.mc_passes, pool.unlabeled, options.parallel};
    const AcquisitionScore score =
        score_pool(config.strategy, models, pool_x, root.substream(stream_tag::kScore, step), opts);
    std::vector<std::size_t> queried;
    for (std::size_t p : select_top_k(score.score, pool.unlabeled, k)) queried.push_back(pool.unlabeled[p]);

    labeled = concat(labeled, labeled_batch(train, oracle, pool, queried));
    pool.move_to_labeled(queried);
    pool.log.push_back({step, config.strategy, queried});

    models = train_models(labeled, net, config.strategy, config.ensemble_size, root, step, options.parallel);
    finish_step(step, models, queried, started);
  }
  return out;
}

void write_query_log(const std::string& path, const std::vector<QueryRecord>& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& q : log) {
    std::vector<std::string> ids;
    for (std::size_t i : q.indices) ids.push_back(std::to_string(i));
    out << q.step << ' ' << strategy_name(q.strategy) << ' ' << join(ids, ",") << '\n';
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

std::vector<QueryRecord> read_query_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<QueryRecord> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string step, strategy, ids;
    if (!(ls >> step >> strategy >> ids)) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected '<step> <strategy> <indices>'");
    }
    QueryRecord q;
    q.step = parse_uint(step, "step");
    q.strategy = parse_strategy(strategy);
    q.indices = parse_size_list(ids, "query indices");
    log.push_back(std::move(q));
  }
  return log;
}

}  // namespace alforge
