#include <cstdlib>
#include <deque>
#include <iostream>

#include <CLI11.hpp>
#include <omp.h>

#include "alforge/experiment.hpp"

namespace alforge {

namespace {

// String-valued flags that map onto configuration keys; only flags given
// on the command line override the config file.
class KeyFlags {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    std::string& slot = values_.emplace_back();
    bindings_.push_back({app->add_option(flag, slot, help), key, &slot});
  }

  void apply(KeyValues& kv) const {
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) kv[b.key] = *b.value;
    }
  }

 private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::string* value;
  };
  std::deque<std::string> values_;
  std::vector<Binding> bindings_;
};

KeyValues load_config(const std::string& path) {
  if (path.empty()) return {};
  try {
    return read_key_values(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void apply_thread_cap() {
  const char* env = std::getenv("ALFORGE_THREADS");
  if (env == nullptr || *env == '\0') return;
  std::uint64_t n = 0;
  try {
    n = parse_uint(env, "ALFORGE_THREADS");
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (n == 0) throw UsageError("ALFORGE_THREADS must be at least 1");
  omp_set_num_threads(static_cast<int>(n));
}

void add_data_flags(CLI::App* app, KeyFlags& flags) {
  flags.add(app, "--preset", "data.preset", "class profile: kitti-ratios or proposals");
  flags.add(app, "--kind", "data.kind", "generator: cluster or patch");
  flags.add(app, "--n-train", "data.n_train", "training pool size");
  flags.add(app, "--n-test", "data.n_test", "test set size");
  flags.add(app, "--dim", "data.feature_dim", "cluster feature dimension");
  flags.add(app, "--separation", "data.separation", "distance between cluster means");
  flags.add(app, "--patch-size", "data.patch_size", "patch side length");
  flags.add(app, "--zero-fill", "data.zero_fill", "fraction of empty patch pixels");
  flags.add(app, "--background-fraction", "data.background_fraction", "background share of proposals");
  flags.add(app, "--band-fraction", "data.band_fraction", "IoU 0.2-0.5 test samples per surviving object");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pool-based deep active learning experiments"};
  app.name("alforge");
  app.require_subcommand(1);
  KeyFlags gen_flags, run_flags;
  std::string gen_config, run_config, report_config, plot_config;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a train/test dataset container");
  gen->add_option("--config", gen_config, "key = value configuration file");
  add_data_flags(gen, gen_flags);
  gen_flags.add(gen, "--seed", "data.seed", "generator seed");
  gen_flags.add(gen, "--out", "out", "output directory");

  CLI::App* run = app.add_subcommand("run", "run active learning loops");
  run->add_option("--config", run_config, "key = value configuration file");
  add_data_flags(run, run_flags);
  run_flags.add(run, "--data", "data.path", "gen-data output directory (otherwise generate in memory)");
  run_flags.add(run, "--data-seed", "data.seed", "generator seed when no --data is given");
  run_flags.add(run, "--strategy", "strategies", "comma-separated strategies");
  run_flags.add(run, "--steps", "loop.max_steps", "maximum query steps");
  run_flags.add(run, "--query", "loop.query", "samples queried per step");
  run_flags.add(run, "--seed-per-class", "loop.seed_per_class", "initial labeled samples per class");
  run_flags.add(run, "--repetitions", "loop.repetitions", "repetitions (seed = master seed + r)");
  run_flags.add(run, "--ensemble", "loop.ensemble", "ensemble size for ens-* strategies");
  run_flags.add(run, "--mc-passes", "loop.mc_passes", "forward passes for mc-* strategies");
  run_flags.add(run, "--stop-rule", "loop.stop_rule", "max-steps, convergence or target");
  run_flags.add(run, "--target", "loop.target_accuracy", "accuracy for the target stop rule");
  run_flags.add(run, "--conv-eps", "loop.conv_epsilon", "accuracy gain threshold for the convergence rule");
  run_flags.add(run, "--conv-window", "loop.conv_window", "window (steps) for the convergence rule");
  run_flags.add(run, "--calib-bins", "loop.calib_bins", "calibration bins");
  run_flags.add(run, "--epochs", "net.epochs", "training epochs");
  run_flags.add(run, "--batch", "net.batch_size", "minibatch size");
  run_flags.add(run, "--lr", "net.lr", "Adam learning rate");
  run_flags.add(run, "--dropout", "net.dropout", "dropout rate");
  run_flags.add(run, "--fc", "net.fc_widths", "comma-separated dense layer widths");
  run_flags.add(run, "--weight-decay", "net.weight_decay", "L2 weight decay");
  run_flags.add(run, "--reference", "reference", "train the full-pool reference model (true/false)");
  run_flags.add(run, "--seed", "seed", "master seed");
  run_flags.add(run, "--out", "out", "output directory");

  ReportOptions report_opts;
  std::string class_thresholds, loc_thresholds;
  CLI::App* report = app.add_subcommand("report", "labels needed per relative-error threshold and savings");
  report->add_option("--config", report_config, "key = value configuration file (report.* keys)");
  report->add_option("--in", report_opts.inputs, "run directories")->expected(1, -1);
  report->add_option("--baseline", report_opts.baseline, "baseline strategy");
  report->add_option("--class-thresholds", class_thresholds, "comma-separated accuracy error thresholds");
  report->add_option("--loc-thresholds", loc_thresholds, "comma-separated relative MSE thresholds");
  report->add_option("--out", report_opts.out_csv, "write the table as CSV");

  std::string plot_in, plot_out, plot_baseline = "random";
  CLI::App* plot = app.add_subcommand("plot-data", "write plot-ready CSVs from a run directory");
  plot->add_option("--config", plot_config, "key = value configuration file (plot.* keys)");
  plot->add_option("--in", plot_in, "run directory");
  plot->add_option("--out", plot_out, "output directory");
  plot->add_option("--baseline", plot_baseline, "baseline strategy for the class delta");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_thread_cap();
    if (*gen) {
      KeyValues kv = load_config(gen_config);
      gen_flags.apply(kv);
      DataSource source;
      try {
        source = DataSource::overlay(source, kv);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      cmd_gen_data(source, kv_string(kv, "out", ""), out);
    } else if (*run) {
      KeyValues kv = load_config(run_config);
      run_flags.apply(kv);
      cmd_run(ExperimentConfig::from_key_values(kv), out);
    } else if (*report) {
      const KeyValues kv = load_config(report_config);
      try {
        if (report->count("--baseline") == 0) report_opts.baseline = kv_string(kv, "report.baseline", report_opts.baseline);
        if (class_thresholds.empty()) class_thresholds = kv_string(kv, "report.class_thresholds", "");
        if (loc_thresholds.empty()) loc_thresholds = kv_string(kv, "report.loc_thresholds", "");
        if (!class_thresholds.empty()) {
          report_opts.classification_thresholds = parse_double_list(class_thresholds, "--class-thresholds");
        }
        if (!loc_thresholds.empty()) {
          report_opts.localization_thresholds = parse_double_list(loc_thresholds, "--loc-thresholds");
        }
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      cmd_report(report_opts, out);
    } else if (*plot) {
      const KeyValues kv = load_config(plot_config);
      if (plot_in.empty()) plot_in = kv_string(kv, "plot.in", "");
      if (plot_out.empty()) plot_out = kv_string(kv, "out", "");
      if (plot_in.empty() || plot_out.empty()) throw UsageError("plot-data needs --in and --out");
      cmd_plot_data(plot_in, plot_out, plot_baseline, out);
    }
  } catch (const UsageError& e) {
    err << "alforge: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "alforge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace alforge
