#include "gres2net/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gres2net/checkpoint.hpp"
#include "gres2net/config.hpp"
#include "gres2net/error.hpp"
#include "gres2net/gradcheck.hpp"
#include "gres2net/keyvalue.hpp"

namespace gres2net {

namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string metric_header(Task task) { return task == Task::classification ? "accuracy" : "rmse,mae,mape,r2"; }

std::string metric_row(Task task, const MetricRecord& m) {
  if (task == Task::classification) return num(m.accuracy);
  return fmt::format("{},{},{},{}", num(m.rmse), num(m.mae), m.mape ? num(*m.mape) : "NA", num(m.r2));
}

std::string metric_report(Task task, const MetricRecord& m) {
  if (task == Task::classification) return fmt::format("accuracy {:.4f}%", m.accuracy);
  return fmt::format("RMSE {:.6g}  MAE {:.6g}  MAPE {}  R2 {:.6g}", m.rmse, m.mae,
                     m.mape ? fmt::format("{:.6g}%", *m.mape) : std::string("undefined (zero target)"), m.r2);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(fmt::format("cannot write '{}'", path.string()));
  f << text;
  if (!f) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

void write_metrics(const fs::path& dir, Task task, const RepeatedEval& ev) {
  std::string repeats = "repeat," + metric_header(task) + "\n";
  for (std::size_t i = 0; i < ev.records.size(); ++i) repeats += fmt::format("{},{}\n", i, metric_row(task, ev.records[i]));
  write_text(dir / "metrics_repeats.csv", repeats);
  write_text(dir / "metrics.csv", metric_header(task) + "\n" + metric_row(task, ev.mean) + "\n");
}

std::string history_row(const EpochRecord& r) {
  return fmt::format("{},{},{},{},{},{}\n", r.epoch, num(r.lr), num(r.train_loss), num(r.train_metric), num(r.val_loss),
                     num(r.val_metric));
}

constexpr const char* kHistoryHeader = "epoch,lr,train_loss,train_metric,val_loss,val_metric\n";

/// Keeps the header and the first `rows` data lines of an existing history file.
std::string history_prefix(const fs::path& path, std::size_t rows) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot resume: '{}' missing", path.string()));
  std::string line, kept;
  std::getline(in, line);
  kept = line + "\n";
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw DataError(fmt::format("cannot resume: '{}' has fewer than {} epochs", path.string(), rows));
    }
    kept += line + "\n";
  }
  return kept;
}

/// Evaluation partition for a checkpoint: raw samples normalised with the
/// checkpoint's own statistics.
DatasetSplit eval_split(const Checkpoint& ckpt, std::vector<Sample> samples, std::size_t found_channels) {
  const ModelSpec& spec = ckpt.spec;
  if (found_channels != spec.input_channels) {
    throw DataError(fmt::format("channel mismatch: checkpoint expects {} input channels, data has {}",
                                spec.input_channels, found_channels));
  }
  DatasetSplit split;
  split.task = spec.task;
  split.channel_names = spec.channel_names;
  split.classes = spec.classes;
  split.horizon = spec.task == Task::forecasting ? spec.outputs : 1;
  if (!ckpt.input_stats.empty()) apply_input_stats(samples, ckpt.input_stats);
  if (!ckpt.target_stats.empty()) apply_target_stats(samples, ckpt.target_stats);
  for (const auto& s : samples) {
    if (spec.task == Task::forecasting && s.target.size() != spec.outputs) {
      throw DataError(fmt::format("horizon mismatch: checkpoint forecasts {} steps, data windows have {}",
                                  spec.outputs, s.target.size()));
    }
  }
  split.input_stats = ckpt.input_stats;
  split.target_stats = ckpt.target_stats;
  split.validation = std::move(samples);
  return split;
}

DatasetSplit eval_split_from_files(const Checkpoint& ckpt, const std::string& data, const std::string& schema_path) {
  const Schema schema = load_schema(schema_path);
  if (schema.task != ckpt.spec.task) {
    throw ConfigError(fmt::format("schema '{}' is for {}, checkpoint is for {}", schema_path, to_string(schema.task),
                                  to_string(ckpt.spec.task)));
  }
  const RawTable table = load_csv(data, schema);
  std::vector<Sample> samples = schema.task == Task::classification ? make_sequences(table, schema, ckpt.spec.classes)
                                                                    : make_windows(table, schema.forecast_window);
  return eval_split(ckpt, std::move(samples), table.names.size());
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> model;
  std::optional<std::size_t> repeats;
  bool resume = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.out_dir) cfg.out = *a.out_dir;
  if (a.model) cfg.model = parse_model_kind(*a.model);
  if (a.repeats) cfg.train.eval_repeats = *a.repeats;
  cfg.validate();

  const DatasetSplit data = load_run_data(cfg);
  const ModelSpec spec = make_model_spec(cfg, data);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);

  Model model(spec, cfg.train.seed);
  std::optional<TrainState> resume;
  std::string history;
  if (a.resume) {
    Checkpoint last = load_checkpoint((dir / "last.ckpt").string());
    if (!(last.spec == spec.canonical())) throw ConfigError("cannot resume: last.ckpt topology differs from the config");
    if (!last.state) throw CheckpointError("cannot resume: last.ckpt has no training state");
    model.restore(last.params);
    resume = *last.state;
    history = history_prefix(dir / "history.csv", resume->next_epoch);
  } else {
    history = kHistoryHeader;
  }
  write_text(dir / "config.txt", cfg.to_text());

  out << fmt::format("training {} ({} parameters) on {} train / {} validation samples, {} epochs\n",
                     to_string(spec.kind), model.parameter_count(), data.train.size(), data.validation.size(),
                     cfg.train.epochs);
  const std::size_t report_every = std::max<std::size_t>(1, cfg.train.epochs / 10);
  const TrainResult result = train_model(model, data, cfg.train, resume ? &*resume : nullptr,
                                         [&](const EpochRecord& r) {
                                           history += history_row(r);
                                           if ((r.epoch + 1) % report_every == 0 || r.epoch + 1 == cfg.train.epochs) {
                                             out << fmt::format("epoch {:4d}  lr {:.0e}  train loss {:.6f}  val {:.6f}\n",
                                                                r.epoch + 1, r.lr, r.train_loss, r.val_metric);
                                           }
                                         });
  write_text(dir / "history.csv", history);
  save_checkpoint((dir / "last.ckpt").string(), make_checkpoint(model, data, &result.state));
  model.restore(result.best_params);
  save_checkpoint((dir / "best.ckpt").string(), make_checkpoint(model, data));

  RepeatedEval ev;
  if (cfg.repeat_mode == RepeatMode::eval) {
    ev = evaluate_repeated(model, data.validation, data, cfg.train.batch_size, cfg.train.eval_repeats);
  } else {
    ev.records.push_back(evaluate(model, data.validation, data, cfg.train.batch_size));
    for (std::size_t i = 1; i < cfg.train.eval_repeats; ++i) {
      TrainConfig rc = cfg.train;
      rc.seed = cfg.train.seed + i;
      Model m(spec, rc.seed);
      const TrainResult r = train_model(m, data, rc);
      m.restore(r.best_params);
      ev.records.push_back(evaluate(m, data.validation, data, rc.batch_size));
      out << fmt::format("retrain {}: {}\n", i, metric_report(spec.task, ev.records.back()));
    }
    ev.mean = average(ev.records);
  }
  write_metrics(dir, spec.task, ev);
  out << fmt::format("best epoch {} (of {}), validation over {} repeats: {}\n", result.best_epoch + 1,
                     cfg.train.epochs, ev.records.size(), metric_report(spec.task, ev.mean));
  return kExitOk;
}

// ---- eval / predict ----------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, config, data, schema, out_dir;
  std::size_t repeats = 5;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  DatasetSplit split;
  std::size_t batch = 32;
  if (!a.config.empty()) {
    const RunConfig cfg = load_run_config(a.config);
    if (cfg.task != ckpt.spec.task) {
      throw ConfigError(fmt::format("config task {} does not match checkpoint task {}", to_string(cfg.task),
                                    to_string(ckpt.spec.task)));
    }
    DatasetSplit raw = load_run_data(cfg, false);
    split = eval_split(ckpt, std::move(raw.validation), raw.input_channels());
    batch = cfg.train.batch_size;
  } else {
    if (a.data.empty() || a.schema.empty()) throw ConfigError("eval needs --config, or both --data and --schema");
    split = eval_split_from_files(ckpt, a.data, a.schema);
  }
  auto model = build_model(ckpt);
  const RepeatedEval ev = evaluate_repeated(*model, split.validation, split, batch, a.repeats);
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_metrics(a.out_dir, split.task, ev);
  }
  out << fmt::format("{} samples, {} repeats: {}\n", split.validation.size(), ev.records.size(),
                     metric_report(split.task, ev.mean));
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint, data, schema, out_file;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const DatasetSplit split = eval_split_from_files(ckpt, a.data, a.schema);
  auto model = build_model(ckpt);
  const Predictions p = predict(*model, split.validation, split, 32);
  std::string text;
  if (split.task == Task::classification) {
    text = "sample,label\n";
    for (std::size_t i = 0; i < p.labels.size(); ++i) text += fmt::format("{},{}\n", i, split.classes.at(p.labels[i]));
  } else {
    text = "sample,step,prediction\n";
    const std::size_t h = split.horizon;
    for (std::size_t i = 0; i < p.series.y_pred.size(); ++i) {
      text += fmt::format("{},{},{}\n", i / h, i % h + 1, num(p.series.y_pred[i]));
    }
  }
  write_text(a.out_file, text);
  out << fmt::format("wrote {} predictions to {}\n", split.validation.size(), a.out_file);
  return kExitOk;
}

// ---- gradcheck ---------------------------------------------------------------

struct GradArgs {
  std::string scope = "all";
  std::uint64_t seed = 0;
  std::size_t seeds = 20;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  std::vector<GradScope> scopes;
  if (a.scope == "all") {
    scopes = {GradScope::tensor, GradScope::nn, GradScope::res2net, GradScope::train};
  } else {
    scopes = {parse_grad_scope(a.scope)};
  }
  if (a.seeds == 0) throw ConfigError("--seeds must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const GradScope scope : scopes) {
    std::vector<std::string> order;
    std::map<std::string, GradCheckResult> worst;
    for (std::uint64_t s = a.seed; s < a.seed + a.seeds; ++s) {
      for (const GradCheckCase& c : gradcheck_suite(scope, s)) {
        const GradCheckResult r = check_gradients(c, 1e-6, 1e-5, a.inject_fault);
        auto it = worst.find(r.name);
        if (it == worst.end()) {
          order.push_back(r.name);
          worst.emplace(r.name, r);
        } else if (r.max_rel_error > it->second.max_rel_error || !r.passed) {
          const bool passed = it->second.passed && r.passed;
          if (r.max_rel_error > it->second.max_rel_error) it->second = r;
          it->second.passed = passed;
        }
      }
    }
    for (const auto& name : order) {
      const GradCheckResult& r = worst.at(name);
      ok = ok && r.passed;
      out << fmt::format("{:<8} {:<34} max rel error {:.3e}  {}\n", to_string(scope), name, r.max_rel_error,
                         r.passed ? "ok" : fmt::format("FAIL ({})", r.worst_param));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << fmt::format("{} over {} seeds in {:.2f} s\n", ok ? "all gradients agree" : "gradient mismatch", a.seeds, secs);
  return ok ? kExitOk : kExitVerify;
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string task;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::optional<std::size_t> size;
  std::optional<double> noise;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const Task task = parse_task(a.task);
  SynthOptions opt;
  if (a.size) opt.size = *a.size;
  if (a.noise) opt.noise = *a.noise;
  const SyntheticData d = make_synthetic_tables(task, a.seed, opt);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  auto csv = [&](const char* name, const RawTable& t) {
    std::ostringstream s;
    write_csv(s, t, d.schema);
    write_text(dir / name, s.str());
  };
  csv("train.csv", d.train);
  csv("validation.csv", d.validation);
  write_text(dir / "schema.txt", d.schema.to_text());
  write_text(dir / "run.cfg", fmt::format("# generated by gres2net synth (seed {}, noise {})\n"
                                          "task = {}\nmodel = gres2net\nout = run\n"
                                          "data.source = files\ndata.schema = schema.txt\n"
                                          "data.train = train.csv\ndata.validation = validation.csv\n",
                                          a.seed, num(d.noise), to_string(task)));
  out << fmt::format("wrote {} synthetic data ({} + {} rows, noise {}) to {}\n", to_string(task), d.train.rows(),
                     d.validation.rows(), d.noise, dir.string());
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GRes2Net: gated Res2Net backbones for multivariate time series"};
  app.name("gres2net");
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", ta.config, "run config file")->required();
  train->add_option("--seed", ta.seed, "override train.seed");
  train->add_option("--out", ta.out_dir, "override the output directory");
  train->add_option("--model", ta.model, "override the model")->check(CLI::IsMember({"gres2net", "res2net", "lstm"}));
  train->add_option("--repeats", ta.repeats, "validation repeats (default 5)");
  train->add_flag("--resume", ta.resume, "continue from <out>/last.ckpt");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  eval->add_option("--config", ea.config, "run config; its validation partition is evaluated");
  eval->add_option("--data", ea.data, "CSV file to evaluate");
  eval->add_option("--schema", ea.schema, "schema for --data");
  eval->add_option("--repeats", ea.repeats, "validation repeats")->capture_default_str();
  eval->add_option("--out", ea.out_dir, "directory for metrics.csv");

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "write predictions for a CSV file");
  pred->add_option("--checkpoint", pa.checkpoint, "checkpoint file")->required();
  pred->add_option("--data", pa.data, "CSV file")->required();
  pred->add_option("--schema", pa.schema, "schema file")->required();
  pred->add_option("--out", pa.out_file, "output CSV")->required();

  GradArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  grad->add_option("--scope", ga.scope, "tensor, nn, res2net, train or all")
      ->check(CLI::IsMember({"tensor", "nn", "res2net", "train", "all"}))
      ->capture_default_str();
  grad->add_option("--seed", ga.seed, "first seed")->capture_default_str();
  grad->add_option("--seeds", ga.seeds, "number of seeds")->capture_default_str();
  grad->add_flag("--inject-fault", ga.inject_fault)->group("");  // harness self-test

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with schema and run config");
  synth->add_option("--task", sa.task, "classification or forecasting")
      ->required()
      ->check(CLI::IsMember({"classification", "forecasting"}));
  synth->add_option("--seed", sa.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", sa.out_dir, "output directory")->required();
  synth->add_option("--size", sa.size, "samples per partition / series length");
  synth->add_option("--noise", sa.noise, "noise level");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(ta, out);
    if (*eval) return cmd_eval(ea, out);
    if (*pred) return cmd_predict(pa, out);
    if (*grad) return cmd_gradcheck(ga, out);
    if (*synth) return cmd_synth(sa, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitData;
  } catch (const NonFiniteError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitVerify;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace gres2net
