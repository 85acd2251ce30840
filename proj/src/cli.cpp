#include "sdgf/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "sdgf/checkpoint.hpp"
#include "sdgf/errors.hpp"
#include "sdgf/training.hpp"

namespace sdgf {

namespace fs = std::filesystem;

namespace {

constexpr double kTrainRatio = 0.7;
constexpr double kValRatio = 0.2;

std::string real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

fs::path prepare_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("output.dir must not be empty");
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig() : RunConfig::load(path);
  for (const auto& o : overrides) cfg.apply(o);
  return cfg;
}

/// Model config with `model.variables=0` resolved from the data.
ModelConfig resolve_model(RunConfig& cfg, const LoadedData& data) {
  ModelConfig m = model_config(cfg);
  const std::size_t n = data.table->variables();
  if (m.variables == 0) {
    m.variables = n;
  } else if (m.variables != n) {
    throw DimensionError("model.variables=" + std::to_string(m.variables) + " but the dataset has " +
                         std::to_string(n) + " variables");
  }
  store_model_config(cfg, m);
  return m;
}

struct TrainedRun {
  SdgfModel model;
  TrainReport report;
  Metrics test;
};

TrainedRun train_and_test(const ModelConfig& m, const LoadedData& data, const TrainConfig& tc, std::ostream& out,
                          const std::string& label) {
  SdgfModel model(m);
  auto report = train(model, data.windows, tc, [&](std::size_t epoch, double loss, const Metrics& val) {
    out << label << "epoch " << epoch << " train_loss " << real(loss) << " val_mse " << real(val.mse) << " val_mae "
        << real(val.mae) << '\n';
  });
  const Metrics test = evaluate(model, data.windows, Split::test, tc.batch);
  return TrainedRun{std::move(model), std::move(report), test};
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides, std::ostream& out) {
  RunConfig cfg = load_run_config(config_path, overrides);
  const LoadedData data = load_dataset(cfg);
  const ModelConfig m = resolve_model(cfg, data);
  const TrainConfig tc = train_config(cfg);
  const fs::path dir = prepare_dir(cfg.get("output.dir"));
  cfg.save(dir / "config.cfg");

  auto run = train_and_test(m, data, tc, out, "");
  save_checkpoint_file(dir / "checkpoint.bin", run.model, cfg);
  write_text(dir / "report.json", run.report.to_json() + "\n");
  out << "best_epoch " << run.report.best_epoch << " best_val_mse " << real(run.report.best_val_mse) << '\n';
  out << "test_mse " << real(run.test.mse) << " test_mae " << real(run.test.mae) << '\n';
  out << "wrote " << (dir / "checkpoint.bin").string() << '\n';
  return 0;
}

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string output_dir;
  bool export_predictions = false;
  bool dump_attention = false;
  bool dump_graphs = false;
};

void write_matrix_csv(const fs::path& path, const Tensor& a, const std::vector<std::string>& names) {
  std::ostringstream s;
  s << "node";
  for (const auto& n : names) s << ',' << n;
  s << '\n';
  const std::size_t N = a.dim(0);
  for (std::size_t i = 0; i < N; ++i) {
    s << names[i];
    for (std::size_t j = 0; j < N; ++j) s << ',' << real(a[i * N + j]);
    s << '\n';
  }
  write_text(path, s.str());
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  LoadedCheckpoint ckpt = load_checkpoint_file(opt.checkpoint);
  RunConfig cfg = ckpt.run;
  if (!opt.data.empty()) {
    cfg.set("data.source", "csv");
    cfg.set("data.path", opt.data);
  }
  if (!opt.output_dir.empty()) cfg.set("output.dir", opt.output_dir);
  const LoadedData data = load_dataset(cfg);
  const ModelConfig& m = ckpt.model.config();
  if (data.table->variables() != m.variables) {
    throw DimensionError("checkpoint expects " + std::to_string(m.variables) + " variables, dataset has " +
                         std::to_string(data.table->variables()));
  }
  const fs::path dir = prepare_dir(cfg.get("output.dir"));
  cfg.save(dir / "config.cfg");

  EvalCapture capture;
  capture.predictions = opt.export_predictions;
  capture.attention = opt.dump_attention;
  capture.graphs = opt.dump_graphs;
  const Metrics test = evaluate(ckpt.model, data.windows, Split::test, train_config(cfg).batch, &capture);
  out << "test_mse " << real(test.mse) << " test_mae " << real(test.mae) << '\n';

  nlohmann::ordered_json metrics;
  metrics["split"] = "test";
  metrics["mse"] = test.mse;
  metrics["mae"] = test.mae;
  metrics["count"] = test.count;
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");

  const auto& names = data.table->names;
  if (opt.export_predictions) {
    std::ofstream csv(dir / "predictions.csv");
    if (!csv) throw DataError("cannot write " + (dir / "predictions.csv").string());
    csv << "window,variable,step,y_true,y_pred\n";
    for (std::size_t w = 0; w < capture.window_starts.size(); ++w) {
      const Tensor& p = capture.predicted[w];
      const Tensor& y = capture.actual[w];
      const std::size_t T = p.dim(0);
      const std::size_t N = p.dim(1);
      for (std::size_t j = 0; j < N; ++j) {
        for (std::size_t t = 0; t < T; ++t) {
          csv << capture.window_starts[w] << ',' << names[j] << ',' << t << ',' << real(y[t * N + j]) << ','
              << real(p[t * N + j]) << '\n';
        }
      }
    }
  }
  if (opt.dump_attention) {
    nlohmann::ordered_json j;
    std::vector<std::string> branches{"static"};
    for (std::size_t s = 1; s <= m.wavelet_levels; ++s) branches.push_back("detail_" + std::to_string(s));
    branches.push_back("approximation");
    j["branches"] = branches;
    auto windows = nlohmann::json::array();
    for (std::size_t w = 0; w < capture.fusion_weights.size(); ++w) {
      windows.push_back({{"window", capture.window_starts.empty() ? w : capture.window_starts[w]},
                         {"weights", capture.fusion_weights[w]}});
    }
    j["windows"] = windows;
    write_text(dir / "attention.json", j.dump(2) + "\n");
  }
  if (opt.dump_graphs) {
    write_matrix_csv(dir / "graph_static.csv", capture.static_adjacency, names);
    for (std::size_t s = 0; s < capture.mean_dynamic_adjacency.size(); ++s) {
      const std::string label = s + 1 == capture.mean_dynamic_adjacency.size() ? std::string("approximation")
                                                                                : "detail_" + std::to_string(s + 1);
      write_matrix_csv(dir / ("graph_dynamic_" + label + ".csv"), capture.mean_dynamic_adjacency[s], names);
    }
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& mode_name,
               std::ostream& out) {
  const Ablation mode = parse_ablation(mode_name);
  if (mode == Ablation::none) throw ConfigError("ablation mode must be one of: gsl, gf, tfl");
  RunConfig cfg = load_run_config(config_path, overrides);
  const LoadedData data = load_dataset(cfg);
  ModelConfig m = resolve_model(cfg, data);
  m.ablation = Ablation::none;
  cfg.set("model.ablation", "none");
  const TrainConfig tc = train_config(cfg);
  const fs::path dir = prepare_dir(cfg.get("output.dir"));
  cfg.save(dir / "config.cfg");

  const auto full = train_and_test(m, data, tc, out, "[full] ");
  ModelConfig am = m;
  am.ablation = mode;
  const auto ablated = train_and_test(am, data, tc, out, "[" + mode_name + "] ");

  std::ostringstream table;
  table << "metric,variant,value\n";
  table << "mse,full," << real(full.test.mse) << '\n';
  table << "mse," << mode_name << ',' << real(ablated.test.mse) << '\n';
  table << "mae,full," << real(full.test.mae) << '\n';
  table << "mae," << mode_name << ',' << real(ablated.test.mae) << '\n';
  write_text(dir / "ablation.csv", table.str());
  out << table.str();
  return 0;
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& output,
              std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path, overrides);
  const SeriesTable table = synthesize(synth_spec(cfg));
  const fs::path path(output);
  if (path.has_parent_path()) prepare_dir(path.parent_path().string());
  save_csv(path, table);
  out << "wrote " << table.rows() << " rows x " << table.variables() << " variables to " << output << '\n';
  return 0;
}

}  // namespace

SynthSpec synth_spec(const RunConfig& cfg) {
  SynthSpec s;
  s.variables = cfg.get_size("synth.variables");
  s.rows = cfg.get_size("synth.rows");
  s.periods = parse_real_list(cfg.get("synth.periods"));
  s.pairs = parse_pairs(cfg.get("synth.pairs"));
  s.lag = cfg.get_size("synth.lag");
  s.noise = cfg.get_double("synth.noise");
  s.seed = cfg.get_u64("synth.seed");
  return s;
}

LoadedData load_dataset(const RunConfig& cfg) {
  const std::string& source = cfg.get("data.source");
  SeriesTable raw;
  if (source == "csv") {
    const std::string& path = cfg.get("data.path");
    if (path.empty()) throw ConfigError("data.path is required when data.source=csv");
    raw = load_csv(path);
  } else if (source == "synth") {
    raw = synthesize(synth_spec(cfg));
  } else {
    throw ConfigError("data.source must be csv or synth, got '" + source + "'");
  }
  const std::size_t L = cfg.get_size("model.lookback");
  const std::size_t T = cfg.get_size("model.horizon");
  const SplitBounds bounds = split_bounds(raw.rows(), kTrainRatio, kValRatio);
  std::optional<Standardizer> scaler;
  if (cfg.get_bool("data.scale")) {
    if (bounds.train_end == 0) throw DataError("training split is empty");
    scaler = Standardizer::fit(raw, bounds.train_end);
    raw = scaler->apply(raw);
  }
  auto table = std::make_shared<const SeriesTable>(std::move(raw));
  WindowDataset windows(table, L, T, bounds);
  return LoadedData{table, std::move(scaler), std::move(windows)};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Static-dynamic graph fusion forecaster"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("-c,--config", config_path, "key=value run configuration");
    if (required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "override a config key (key=value), repeatable");
  };

  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, report and config");
  add_config(train_cmd, true);

  EvalOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_opt.data, "dataset CSV (default: path stored in the checkpoint)");
  eval_cmd->add_option("--output-dir", eval_opt.output_dir, "output directory (default: output.dir)");
  eval_cmd->add_flag("--export-predictions", eval_opt.export_predictions, "write predictions.csv");
  eval_cmd->add_flag("--dump-attention", eval_opt.dump_attention, "write fusion weights to attention.json");
  eval_cmd->add_flag("--dump-graphs", eval_opt.dump_graphs, "write static and mean dynamic adjacency CSVs");

  std::string mode;
  auto* ablate_cmd = app.add_subcommand("ablate", "train the full model and one ablated variant");
  add_config(ablate_cmd, true);
  ablate_cmd->add_option("--mode", mode, "gsl, gf or tfl")->required();

  std::string synth_output;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset CSV");
  add_config(synth_cmd, false);
  synth_cmd->add_option("-o,--output", synth_output, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, overrides, out);
    if (*eval_cmd) return cmd_eval(eval_opt, out);
    if (*ablate_cmd) return cmd_ablate(config_path, overrides, mode, out);
    return cmd_synth(config_path, overrides, synth_output, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace sdgf
