#include "alforge/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "alforge/csv.hpp"
#include "alforge/datagen.hpp"
#include "alforge/tensor_io.hpp"

namespace alforge {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kReferenceTag = 0x4ef;

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string kind_name(ErrorKind k) { return k == ErrorKind::Classification ? "classification" : "localization"; }

void save_text(const std::string& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError(what + ": expected true or false, got '" + v + "'");
}

std::string run_file(const std::string& dir, const std::string& stem, const std::string& strategy, std::size_t rep) {
  return (fs::path(dir) / (stem + "_" + strategy + "_" + std::to_string(rep) + ".csv")).string();
}

// Accuracy and location error of a single deterministic network.
ReferenceMetrics evaluate_reference(const Model& model, const Dataset& test) {
  const Prediction p = forward(model, test.features, ForwardMode::deterministic());
  return {accuracy(argmax_rows(p.class_probs), test.labels), loc_mse(p.loc, test.locations, test.loc_mask)};
}

ReferenceMetrics reference_for(const DataSplit& data, const NetworkConfig& net, std::uint64_t seed,
                               const std::string& path, std::ostream& log) {
  const std::string dataset_key =
      std::to_string(dataset_fingerprint(data.train) ^ mix64(dataset_fingerprint(data.test)));
  const std::string config_key = std::to_string(fnv1a(format_key_values(net.to_key_values())));
  const std::string seed_key = std::to_string(seed);
  if (fs::exists(path)) {
    const CsvTable t = read_csv(path);
    if (t.rows.size() == 1 && t.text(0, "dataset_hash") == dataset_key && t.text(0, "config_hash") == config_key &&
        t.text(0, "seed") == seed_key) {
      log << "reference model for seed " << seed << " reused from " << path << "\n";
      return {t.number(0, "accuracy"), t.number(0, "loc_mse")};
    }
  }
  const Model model = train(data.train, net, RngStream(seed, 0).substream(kReferenceTag)).model;
  const ReferenceMetrics ref = evaluate_reference(model, data.test);
  CsvWriter w({"dataset_hash", "config_hash", "seed", "accuracy", "loc_mse"});
  w.cell(dataset_key).cell(config_key).cell(seed_key).cell(ref.accuracy).cell(ref.loc_mse);
  w.end_row();
  w.save(path);
  return ref;
}

void write_calibration(const std::string& path, const LoopResult& res) {
  CsvWriter w({"step", "bin", "lower", "upper", "mean_confidence", "accuracy", "count"});
  for (std::size_t s = 0; s < res.diagnostics.size(); ++s) {
    const auto& bins = res.diagnostics[s].calibration.bins;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      w.cell(res.records[s].step).cell(b).cell(bins[b].lower).cell(bins[b].upper);
      w.cell(bins[b].mean_confidence).cell(bins[b].accuracy).cell(bins[b].count);
      w.end_row();
    }
  }
  w.save(path);
}

void write_error_curves(const std::string& path, const LoopResult& res) {
  CsvWriter w({"step", "point", "retained_fraction", "method_loss", "oracle_loss"});
  for (std::size_t s = 0; s < res.diagnostics.size(); ++s) {
    const Sparsification& sp = res.diagnostics[s].sparsification;
    for (std::size_t j = 0; j < sp.method.mean_loss.size(); ++j) {
      w.cell(res.records[s].step).cell(j).cell(sp.method.retained_fraction[j]);
      w.cell(sp.method.mean_loss[j]).cell(sp.oracle.mean_loss[j]);
      w.end_row();
    }
  }
  w.save(path);
}

// (strategy, repetition) pairs with a metrics file in `dir`.
std::vector<std::pair<std::string, std::size_t>> find_runs(const std::string& dir) {
  static const std::regex pattern(R"(metrics_(.+)_(\d+)\.csv)");
  std::vector<std::pair<std::string, std::size_t>> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) out.emplace_back(m[1].str(), std::stoul(m[2].str()));
  }
  std::ranges::sort(out);
  return out;
}

std::vector<CurvePoint> curve_of(const std::vector<MetricsRecord>& records) {
  std::vector<CurvePoint> out;
  for (const auto& r : records) out.push_back({r.labeled_count, r.accuracy, r.loc_mse});
  return out;
}

KeyValues comparable_echo(const std::string& dir) {
  const std::string path = (fs::path(dir) / "config.echo").string();
  if (!fs::exists(path)) throw UsageError(dir + " has no config.echo; is it a run directory?");
  KeyValues kv = read_key_values(path);
  kv.erase("strategies");
  kv.erase("out");
  return kv;
}

std::vector<std::size_t> read_pool_counts(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) out.push_back(parse_uint(t.text(i, "pool_count"), "pool_count"));
  return out;
}

}  // namespace

KeyValues DataSource::to_key_values() const {
  return {
      {"data.path", path},
      {"data.preset", preset},
      {"data.kind", kind},
      {"data.n_train", std::to_string(n_train)},
      {"data.n_test", std::to_string(n_test)},
      {"data.feature_dim", std::to_string(feature_dim)},
      {"data.separation", format_double(separation)},
      {"data.patch_size", std::to_string(patch_size)},
      {"data.zero_fill", format_double(zero_fill)},
      {"data.background_fraction", format_double(background_fraction)},
      {"data.band_fraction", format_double(band_fraction)},
      {"data.seed", std::to_string(seed)},
  };
}

DataSource DataSource::overlay(DataSource d, const KeyValues& kv) {
  d.path = kv_string(kv, "data.path", d.path);
  d.preset = kv_string(kv, "data.preset", d.preset);
  d.kind = kv_string(kv, "data.kind", d.kind);
  d.n_train = kv_uint(kv, "data.n_train", d.n_train);
  d.n_test = kv_uint(kv, "data.n_test", d.n_test);
  d.feature_dim = kv_uint(kv, "data.feature_dim", d.feature_dim);
  d.separation = kv_double(kv, "data.separation", d.separation);
  d.patch_size = kv_uint(kv, "data.patch_size", d.patch_size);
  d.zero_fill = kv_double(kv, "data.zero_fill", d.zero_fill);
  d.background_fraction = kv_double(kv, "data.background_fraction", d.background_fraction);
  d.band_fraction = kv_double(kv, "data.band_fraction", d.band_fraction);
  d.seed = kv_uint(kv, "data.seed", d.seed);
  if (d.kind != "cluster" && d.kind != "patch") {
    throw ConfigError("data.kind must be cluster or patch, got '" + d.kind + "'");
  }
  ClassProfile::preset(d.preset);
  return d;
}

DataSplit generate_data(const DataSource& source) {
  const ClassProfile profile = ClassProfile::preset(source.preset);
  const RngStream root(source.seed, 0);
  DataSplit split;
  if (source.kind == "cluster") {
    ClusterSplit c = gen_cluster_dataset(profile, source.n_train, source.n_test, source.feature_dim, source.separation,
                                         root.substream(1));
    split = {std::move(c.train), std::move(c.test)};
  } else {
    split.train = gen_patch_dataset(profile, source.patch_size, source.n_train, source.zero_fill, root.substream(1));
    split.test = gen_patch_dataset(profile, source.patch_size, source.n_test, source.zero_fill, root.substream(2));
  }
  if (source.preset == "proposals") {
    ProposalProfile pp = ProposalProfile::detector_preset();
    pp.background_fraction = source.background_fraction;
    pp.band_fraction = source.band_fraction;
    split.train = simulate_proposals(split.train, pp, root.substream(3)).pool;
    ProposalPool test = simulate_proposals(split.test, pp, root.substream(4));
    split.test = concat(test.pool, test.band);
  }
  for (Dataset* ds : {&split.train, &split.test}) {
    ds->generator["preset"] = source.preset;
    ds->generator["seed"] = std::to_string(source.seed);
  }
  return split;
}

DataSplit load_data(const DataSource& source) {
  if (source.path.empty()) return generate_data(source);
  return {dataset_read((fs::path(source.path) / "train").string()),
          dataset_read((fs::path(source.path) / "test").string())};
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&](const std::vector<std::uint8_t>& bytes) { h = fnv1a(std::string(bytes.begin(), bytes.end()), h); };
  feed(encode_tensor(ds.features));
  feed(encode_tensor(IntTensor{{ds.size()}, ds.labels}));
  feed(encode_tensor(ds.locations));
  feed(encode_tensor(IntTensor{{ds.size()}, ds.loc_mask}));
  h = fnv1a(join(ds.class_names, ","), h);
  return h;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  try {
    ExperimentConfig c;
    c.data = DataSource::overlay(c.data, kv);
    for (const auto& [k, v] : kv) {
      if (k.starts_with("net.")) c.net_overrides[k] = v;
    }
    c.loop = LoopConfig::overlay(c.loop, kv);
    c.loop.validate();
    if (kv.contains("strategies")) {
      c.strategies.clear();
      for (const auto& name : split(kv.at("strategies"), ',')) c.strategies.push_back(parse_strategy(name));
    }
    c.master_seed = kv_uint(kv, "seed", c.master_seed);
    c.out = kv_string(kv, "out", c.out);
    if (kv.contains("reference")) c.reference = parse_bool(kv.at("reference"), "reference");
    if (c.out.empty()) throw ConfigError("output directory is empty");
    return c;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

KeyValues ExperimentConfig::to_key_values(const NetworkConfig& resolved_net) const {
  KeyValues kv = data.to_key_values();
  kv.merge(resolved_net.to_key_values());
  kv.merge(loop.to_key_values());
  kv.erase("loop.strategy");
  std::vector<std::string> names;
  for (Strategy s : strategies) names.emplace_back(strategy_name(s));
  kv["strategies"] = join(names, ",");
  kv["seed"] = std::to_string(master_seed);
  kv["out"] = out;
  kv["reference"] = reference ? "true" : "false";
  return kv;
}

NetworkConfig ExperimentConfig::resolve_network(const Dataset& train) const {
  NetworkConfig net;
  try {
    net = NetworkConfig::overlay(NetworkConfig::desk_preset(train.feature_shape(), train.num_classes()), net_overrides);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (net.num_classes != train.num_classes() || net.input_shape() != train.feature_shape()) {
    throw UsageError("network config (" + std::to_string(net.num_classes) + " classes, input " +
                     shape_string(net.input_shape()) + ") does not fit the dataset (" +
                     std::to_string(train.num_classes()) + " classes, input " + shape_string(train.feature_shape()) +
                     ")");
  }
  try {
    net.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return net;
}

void cmd_gen_data(const DataSource& source, const std::string& out, std::ostream& log) {
  if (out.empty()) throw UsageError("gen-data needs --out");
  const DataSplit split = generate_data(source);
  dataset_write((fs::path(out) / "train").string(), split.train, source.seed);
  dataset_write((fs::path(out) / "test").string(), split.test, source.seed);
  for (const auto& [name, ds] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
    log << name << ": " << ds->size() << " samples\n";
    const auto counts = ds->class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) log << "  " << ds->class_names[c] << ": " << counts[c] << "\n";
  }
}

void cmd_run(const ExperimentConfig& config, std::ostream& log) {
  if (config.strategies.empty()) throw UsageError("no strategy given");
  const DataSplit data = load_data(config.data);
  const NetworkConfig net = config.resolve_network(data.train);
  fs::create_directories(config.out);
  save_text((fs::path(config.out) / "config.echo").string(), format_key_values(config.to_key_values(net)));

  std::string run_log;
  for (std::size_t r = 0; r < config.loop.repetitions; ++r) {
    const std::uint64_t seed = config.master_seed + r;
    if (config.reference) {
      const std::string path = (fs::path(config.out) / ("reference_" + std::to_string(r) + ".csv")).string();
      const ReferenceMetrics ref = reference_for(data, net, seed, path, log);
      run_log += "rep " + std::to_string(r) + " reference accuracy " + format_double(ref.accuracy) + " loc_mse " +
                 format_double(ref.loc_mse) + "\n";
    }
    for (Strategy s : config.strategies) {
      LoopConfig loop = config.loop;
      loop.strategy = s;
      const std::string name(strategy_name(s));
      const std::size_t members = models_per_step(s, loop.ensemble_size);
      LoopOptions opts;
      opts.on_step = [&](const MetricsRecord& rec, const PoolState&) {
        run_log += "rep " + std::to_string(r) + " strategy " + name + " step " + std::to_string(rec.step) +
                   " labeled " + std::to_string(rec.labeled_count) + " members " + std::to_string(members) +
                   " accuracy " + format_double(rec.accuracy) + "\n";
        log << "rep " << r << " " << name << " step " << rec.step << " labeled " << rec.labeled_count << " accuracy "
            << rec.accuracy << " (" << rec.wall_time_s << " s)\n";
      };
      const LoopResult res = run_loop(data.train, data.test, loop, net, seed, opts);
      write_metrics_csv(run_file(config.out, "metrics", name, r), res.records, data.train.num_classes());
      write_query_log((fs::path(config.out) / ("querylog_" + name + "_" + std::to_string(r) + ".txt")).string(),
                      res.pool.log);
      write_calibration(run_file(config.out, "calib", name, r), res);
      write_error_curves(run_file(config.out, "errcurve", name, r), res);
      CsvWriter pool({"class", "name", "pool_count", "seed_shortfall"});
      for (std::size_t c = 0; c < res.pool_class_counts.size(); ++c) {
        pool.cell(c).cell(data.train.class_names[c]).cell(res.pool_class_counts[c]).cell(res.pool.shortfall[c]);
        pool.end_row();
      }
      pool.save((fs::path(config.out) / ("pool_" + std::to_string(r) + ".csv")).string());
    }
  }
  save_text((fs::path(config.out) / "run.log").string(), run_log);
}

Report cmd_report(const ReportOptions& options, std::ostream& out) {
  if (options.inputs.empty()) throw UsageError("report needs at least one --in directory");
  const KeyValues first = comparable_echo(options.inputs[0]);
  for (std::size_t d = 1; d < options.inputs.size(); ++d) {
    const KeyValues other = comparable_echo(options.inputs[d]);
    if (other == first) continue;
    std::string key;
    for (const auto& [k, v] : first) {
      if (!other.contains(k) || other.at(k) != v) {
        key = k;
        break;
      }
    }
    if (key.empty()) key = std::prev(other.end())->first;
    throw UsageError("runs in " + options.inputs[0] + " and " + options.inputs[d] + " have different configs (" +
                     key + ")");
  }

  std::map<std::string, std::map<std::size_t, std::vector<CurvePoint>>> curves;
  std::map<std::size_t, ReferenceMetrics> refs;
  for (const auto& dir : options.inputs) {
    for (const auto& [strategy, rep] : find_runs(dir)) {
      if (curves[strategy].contains(rep)) {
        throw UsageError("strategy " + strategy + " repetition " + std::to_string(rep) + " appears twice");
      }
      curves[strategy][rep] = curve_of(read_metrics_csv(run_file(dir, "metrics", strategy, rep)));
      const std::string ref_path = (fs::path(dir) / ("reference_" + std::to_string(rep) + ".csv")).string();
      if (!refs.contains(rep) && fs::exists(ref_path)) {
        const CsvTable t = read_csv(ref_path);
        refs[rep] = {t.number(0, "accuracy"), t.number(0, "loc_mse")};
      }
    }
  }
  if (curves.empty()) throw UsageError("no metrics_<strategy>_<rep>.csv files in the input directories");
  if (!curves.contains(options.baseline)) throw UsageError("baseline strategy " + options.baseline + " has no runs");

  std::vector<std::string> order = {options.baseline};
  for (const auto& [name, reps] : curves) {
    if (name != options.baseline) order.push_back(name);
  }
  Report report;
  for (const std::string& name : order) {
    for (const auto& [rep, curve] : curves.at(name)) {
      const auto base = curves.at(options.baseline).find(rep);
      if (base == curves.at(options.baseline).end()) continue;
      if (!refs.contains(rep)) {
        throw std::runtime_error("no reference_" + std::to_string(rep) + ".csv; rerun with the reference model enabled");
      }
      for (const SavingsEntry& e : relative_error_report(curve, base->second, refs.at(rep),
                                                         options.classification_thresholds,
                                                         options.localization_thresholds)) {
        report.rows.push_back({e.kind, e.threshold, name, rep, e});
      }
    }
  }
  for (const std::string& name : order) {
    for (ErrorKind kind : {ErrorKind::Classification, ErrorKind::Localization}) {
      const auto& thresholds =
          kind == ErrorKind::Classification ? options.classification_thresholds : options.localization_thresholds;
      for (double t : thresholds) {
        ReportSummary s{kind, t, name};
        std::vector<double> values;
        for (const auto& row : report.rows) {
          if (row.strategy != name || row.kind != kind || row.threshold != t) continue;
          ++s.repetitions;
          if (row.entry.savings) values.push_back(*row.entry.savings);
        }
        s.reached = values.size();
        if (!values.empty()) {
          double sum = 0.0;
          for (double v : values) sum += v;
          s.mean_savings = sum / static_cast<double>(values.size());
          s.min_savings = *std::ranges::min_element(values);
          s.max_savings = *std::ranges::max_element(values);
        }
        report.summary.push_back(s);
      }
    }
  }

  auto labels = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("unreached"); };
  char line[256];
  std::snprintf(line, sizeof line, "%-15s %9s  %-16s %4s %10s %10s %10s\n", "kind", "threshold", "strategy", "rep",
                "baseline", "method", "savings");
  out << line;
  for (const auto& row : report.rows) {
    std::snprintf(line, sizeof line, "%-15s %9g  %-16s %4zu %10s %10s %10s\n", kind_name(row.kind).c_str(),
                  row.threshold, row.strategy.c_str(), row.repetition, labels(row.entry.baseline_labels).c_str(),
                  labels(row.entry.method_labels).c_str(),
                  row.entry.savings ? percent(*row.entry.savings).c_str() : "unreached");
    out << line;
  }
  out << "\nsavings vs " << options.baseline << " over repetitions\n";
  for (const auto& s : report.summary) {
    if (s.reached == 0) {
      std::snprintf(line, sizeof line, "%-15s %9g  %-16s unreached (0/%zu reps)\n", kind_name(s.kind).c_str(),
                    s.threshold, s.strategy.c_str(), s.repetitions);
    } else {
      std::snprintf(line, sizeof line, "%-15s %9g  %-16s mean %s range [%s, %s] (%zu/%zu reps)\n",
                    kind_name(s.kind).c_str(), s.threshold, s.strategy.c_str(), percent(s.mean_savings).c_str(),
                    percent(s.min_savings).c_str(), percent(s.max_savings).c_str(), s.reached, s.repetitions);
    }
    out << line;
  }

  if (!options.out_csv.empty()) {
    CsvWriter w({"kind", "threshold", "strategy", "repetition", "baseline_labels", "method_labels", "savings"});
    for (const auto& row : report.rows) {
      w.cell(kind_name(row.kind)).cell(row.threshold).cell(row.strategy).cell(row.repetition);
      w.cell(labels(row.entry.baseline_labels)).cell(labels(row.entry.method_labels));
      if (row.entry.savings) {
        w.cell(*row.entry.savings);
      } else {
        w.cell(std::string("unreached"));
      }
      w.end_row();
    }
    w.save(options.out_csv);
  }
  return report;
}

void cmd_plot_data(const std::string& in, const std::string& out, const std::string& baseline, std::ostream& log) {
  const auto runs = find_runs(in);
  if (runs.empty()) {
    throw std::runtime_error(in + ": no runs found; expected metrics_<strategy>_<rep>.csv, calib_<strategy>_<rep>.csv, "
                                  "errcurve_<strategy>_<rep>.csv and pool_<rep>.csv");
  }
  std::vector<std::string> missing;
  for (const auto& [s, r] : runs) {
    for (const std::string& path : {run_file(in, "calib", s, r), run_file(in, "errcurve", s, r),
                                    (fs::path(in) / ("pool_" + std::to_string(r) + ".csv")).string()}) {
      if (!fs::exists(path)) missing.push_back(path);
    }
  }
  if (!missing.empty()) {
    std::ranges::sort(missing);
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    throw std::runtime_error("missing plot inputs: " + join(missing, ", "));
  }
  fs::create_directories(out);

  std::map<std::pair<std::string, std::size_t>, std::vector<MetricsRecord>> metrics;
  CsvWriter curve({"strategy", "repetition", "step", "labeled_count", "accuracy", "loc_mse"});
  for (const auto& [s, r] : runs) {
    auto& recs = metrics[{s, r}] = read_metrics_csv(run_file(in, "metrics", s, r));
    for (const auto& rec : recs) {
      curve.cell(s).cell(r).cell(rec.step).cell(rec.labeled_count).cell(rec.accuracy).cell(rec.loc_mse);
      curve.end_row();
    }
  }
  curve.save((fs::path(out) / "learning_curve.csv").string());

  // Split the per-run calibration and error-curve tables by step.
  for (const auto& [stem, target, fields] :
       {std::tuple<std::string, std::string, std::vector<std::string>>{
            "calib", "calibration_step", {"bin", "lower", "upper", "mean_confidence", "accuracy", "count"}},
        {"errcurve", "errorcurve_step", {"point", "retained_fraction", "method_loss", "oracle_loss"}}}) {
    std::map<std::size_t, CsvWriter> by_step;
    std::vector<std::string> header = {"strategy", "repetition"};
    header.insert(header.end(), fields.begin(), fields.end());
    for (const auto& [s, r] : runs) {
      const CsvTable t = read_csv(run_file(in, stem, s, r));
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t step = parse_uint(t.text(i, "step"), "step");
        auto it = by_step.try_emplace(step, header).first;
        it->second.cell(s).cell(r);
        for (const auto& f : fields) it->second.cell(t.text(i, f));
        it->second.end_row();
      }
    }
    for (const auto& [step, w] : by_step) w.save((fs::path(out) / (target + std::to_string(step) + ".csv")).string());
  }

  CsvWriter delta({"strategy", "repetition", "step", "class", "delta"});
  for (const auto& [key, recs] : metrics) {
    const auto& [s, r] = key;
    const auto base = metrics.find({baseline, r});
    if (base == metrics.end()) continue;
    // Step 0 is the shared seed set; runs that stopped early are compared
    // over their common steps.
    const std::size_t steps = std::min(recs.size(), base->second.size());
    std::vector<std::vector<std::size_t>> a, b;
    for (std::size_t k = 1; k < steps; ++k) {
      a.push_back(recs[k].queried_per_class);
      b.push_back(base->second[k].queried_per_class);
    }
    const auto pool = read_pool_counts((fs::path(in) / ("pool_" + std::to_string(r) + ".csv")).string());
    const auto d = class_distribution_delta_counts(a, b, pool);
    for (std::size_t k = 0; k < d.size(); ++k) {
      for (std::size_t c = 0; c < d[k].size(); ++c) {
        delta.cell(s).cell(r).cell(recs[k + 1].step).cell(c).cell(d[k][c]);
        delta.end_row();
      }
    }
  }
  delta.save((fs::path(out) / "classdelta.csv").string());
  log << "plot data written to " << out << "\n";
}

}  // namespace alforge
