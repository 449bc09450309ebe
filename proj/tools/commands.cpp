#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "tinydl/errors.hpp"
#include "tinydl/generative.hpp"
#include "tinydl/metrics.hpp"
#include "tinydl/model_io.hpp"
#include "tinydl/recurrent.hpp"

namespace fs = std::filesystem;

namespace tinydl::cli {

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

struct Context {
  RunConfig cfg;
  std::string fingerprint;
  fs::path out_dir;
  std::ostream& out;
  bool quiet;

  void say(const std::string& line) const {
    if (!quiet) out << line << '\n';
  }
};

Context prepare(const Options& opt, std::ostream& out) {
  json raw = read_config_file(opt.config);
  if (!raw.is_object()) throw ConfigError("invalid configuration: top level must be an object");
  if (opt.seed) raw["seed"] = *opt.seed;
  if (!opt.out.empty()) raw["output"] = opt.out;
  RunConfig cfg = load_run_config(raw);
  const std::string fp = fingerprint(cfg.normalized);
  const fs::path dir = cfg.output;
  return Context{std::move(cfg), fp, dir, out, opt.quiet};
}

// Called only once validation has passed.
void make_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw LoadError(LoadError::Kind::io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError(LoadError::Kind::io, "cannot open " + path.string() + " for writing");
  return f;
}

void write_json(const fs::path& path, const json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json to_json(const Metrics& m) {
  return {{"task", to_string(m.task)},
          {"accuracy", m.accuracy},
          {"per_class_accuracy", m.per_class_accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"confusion", m.confusion},
          {"coin_baseline", m.coin_baseline},
          {"majority_baseline", m.majority_baseline},
          {"baseline", m.baseline},
          {"loss", m.loss},
          {"count", m.count}};
}

json report_header(const Context& c, const std::string& command) {
  return {{"command", command},
          {"name", c.cfg.name},
          {"seed", c.cfg.seed},
          {"fingerprint", c.fingerprint},
          {"config", c.cfg.normalized}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_classification(const RunConfig& cfg, const std::string& command) {
  const std::string task = cfg.normalized["task"];
  if (task == "none" || task == "auto" || cfg.task == Task::sequence) {
    throw ConfigError("invalid configuration:\n  task: " + command + " needs a classification or per-pixel task");
  }
}

struct Prepared {
  Splits splits;
  std::optional<Standardizer> standardizer;
};

Prepared prepare_data(const RunConfig& cfg) {
  Dataset ds = materialize_dataset(cfg);
  ds.validate();
  if (ds.empty() || ds.input_shape() != cfg.input_shape || ds.target_shape() != cfg.target_shape) {
    throw ConfigError("data: dataset shapes changed since validation");
  }
  Prepared p;
  p.splits = split(ds, cfg.split);
  if (cfg.standardize) {
    p.standardizer = fit_standardizer(p.splits.train);
    p.splits.train = p.standardizer->apply(p.splits.train);
    p.splits.val = p.standardizer->apply(p.splits.val);
    p.splits.test = p.standardizer->apply(p.splits.test);
  }
  return p;
}

Network fresh_network(const RunConfig& cfg) {
  Network net = build_network(cfg.architecture, cfg.seed);
  if (!cfg.pretrained.empty()) load_pretrained(net, cfg.pretrained);
  net.freeze(cfg.freeze);
  return net;
}

std::string model_path(const Context& c, const json& section) {
  return section["model"].is_null() ? (c.out_dir / "model.sgm").string() : section["model"].get<std::string>();
}

// --- subcommands -----------------------------------------------------------------

int cmd_check(const Context& c) {
  const RunConfig& cfg = c.cfg;
  c.out << "config ok  fingerprint " << c.fingerprint << '\n';
  const std::string task = cfg.normalized["task"];
  c.out << "task " << task << "  input " << to_string(cfg.input_shape) << "\n";
  if (cfg.architecture.layers.empty()) return kOk;
  const auto display = [](const Shape& s) {
    if (s.size() == 3) return std::to_string(s[1]) + "x" + std::to_string(s[2]) + "x" + std::to_string(s[0]);
    std::string r;
    for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "x" : "") + std::to_string(s[i]);
    return r;
  };
  const auto shapes = infer_shapes(cfg.architecture);
  c.out << std::left << std::setw(6) << "index" << std::setw(14) << "layer" << std::setw(16) << "output (HxWxC)"
        << "params\n";
  c.out << std::setw(6) << "-" << std::setw(14) << "input" << std::setw(16) << display(cfg.architecture.input_shape)
        << "0\n";
  std::size_t total = 0;
  for (std::size_t i = 0; i < cfg.architecture.layers.size(); ++i) {
    Architecture one{"", i == 0 ? cfg.architecture.input_shape : shapes[i - 1], {cfg.architecture.layers[i]}};
    const std::size_t params = param_count(one);
    total += params;
    c.out << std::setw(6) << i << std::setw(14) << layer_type_name(cfg.architecture.layers[i]) << std::setw(16)
          << display(shapes[i]) << params << '\n';
  }
  c.out << "total parameters " << total << '\n';
  return kOk;
}

int cmd_train(const Context& c) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& cfg = c.cfg;
  require_classification(cfg, "train");
  Prepared data = prepare_data(cfg);
  Network net = fresh_network(cfg);
  make_output_dir(c.out_dir);

  const Metrics before = evaluate(net, data.splits.test, cfg.task);
  TrainHistory partial;
  TrainHistory history;
  try {
    history = train(net, data.splits.train, data.splits.val, cfg.train, &partial);
  } catch (const TrainingError&) {
    auto f = open_out(c.out_dir / "history.csv");
    partial.write_csv(f);
    throw;
  }
  const Metrics after = evaluate(net, data.splits.test, cfg.task);

  save_model((c.out_dir / "model.sgm").string(), net, cfg.task);
  {
    auto f = open_out(c.out_dir / "history.csv");
    history.write_csv(f);
  }
  json report = report_header(c, "train");
  report["metrics"] = to_json(after);
  report["baseline_metrics"] = to_json(before);
  report["history"] = "history.csv";
  report["epochs_run"] = history.epochs.size();
  report["best_epoch"] = history.best_epoch;
  report["stop_reason"] = history.stop == StopReason::early_stop ? "early_stop" : "max_epochs";
  report["splits"] = {{"train", data.splits.train.size()},
                      {"val", data.splits.val.size()},
                      {"test", data.splits.test.size()}};
  report["standardized"] = cfg.standardize;
  report["duration_seconds"] = seconds_since(start);
  write_json(c.out_dir / "report.json", report);
  c.say("test accuracy " + fixed(after.accuracy) + " (untrained " + fixed(before.accuracy) + ", baseline " +
        fixed(after.baseline) + ", coin " + fixed(after.coin_baseline) + ") after " +
        std::to_string(history.epochs.size()) + " epochs");
  return kOk;
}

int cmd_eval(const Context& c) {
  const RunConfig& cfg = c.cfg;
  require_classification(cfg, "eval");
  Prepared data = prepare_data(cfg);
  LoadedModel m = load_model(model_path(c, cfg.normalized["eval"]));
  const Metrics metrics = evaluate(m.net, data.splits.test, cfg.task);
  make_output_dir(c.out_dir);
  json report = report_header(c, "eval");
  report["metrics"] = to_json(metrics);
  write_json(c.out_dir / "eval.json", report);
  c.say("test accuracy " + fixed(metrics.accuracy) + " (baseline " + fixed(metrics.baseline) + ")");
  return kOk;
}

int cmd_gradcheck(const Context& c) {
  const RunConfig& cfg = c.cfg;
  require_classification(cfg, "gradcheck");
  const json& g = cfg.normalized["gradcheck"];
  Architecture arch = cfg.architecture;
  for (auto& l : arch.layers) {
    if (l.kind == LayerKind::dropout) l.rate = 0.0;
  }
  Prepared data = prepare_data(cfg);
  Network net = build_network(arch, cfg.seed);
  net.freeze(cfg.freeze);
  GradCheckOptions opts;
  opts.eps = g["eps"];
  opts.tolerance = g["tolerance"];
  opts.reg_strength = cfg.train.reg_strength;
  opts.seed = Rng::derive(cfg.seed, "dropout");
  opts.max_per_tensor = g["max_per_tensor"];
  const std::size_t k = std::min(g["examples"].get<std::size_t>(), data.splits.train.size());
  double worst = 0.0, resolved = 0.0;
  std::size_t probes = 0, skipped = 0, unresolved = 0;
  json per_example = json::array();
  for (std::size_t i = 0; i < k; ++i) {
    const Example& ex = data.splits.train.examples[i];
    const GradCheckResult r = gradient_check(net, ex.input, ex.target, cfg.train.loss, opts);
    worst = std::max(worst, r.max_rel_error);
    resolved = std::max(resolved, r.resolved_max_rel_error);
    probes += r.probes;
    skipped += r.skipped;
    unresolved += r.unresolved;
    per_example.push_back({{"max_rel_error", r.max_rel_error},
                           {"resolved_max_rel_error", r.resolved_max_rel_error},
                           {"probes", r.probes},
                           {"skipped", r.skipped},
                           {"unresolved", r.unresolved}});
  }
  const bool pass = worst < opts.tolerance;
  make_output_dir(c.out_dir);
  json report = report_header(c, "gradcheck");
  report["pass"] = pass;
  report["max_rel_error"] = worst;
  report["resolved_max_rel_error"] = resolved;
  report["probes"] = probes;
  report["skipped"] = skipped;
  report["unresolved"] = unresolved;
  report["examples"] = per_example;
  write_json(c.out_dir / "gradcheck.json", report);
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " gradient check: max relative error " << std::scientific << std::setprecision(3)
     << worst << " over " << probes << " probes (" << skipped << " skipped at kinks; " << resolved << " over the "
     << probes - unresolved << " above the rounding floor)";
  c.say(os.str());
  return pass ? kOk : kCheckFailed;
}

int cmd_saliency(const Context& c) {
  const RunConfig& cfg = c.cfg;
  require_classification(cfg, "saliency");
  const json& s = cfg.normalized["saliency"];
  Prepared data = prepare_data(cfg);
  const std::size_t idx = s["example"];
  if (idx >= data.splits.test.size()) {
    throw ConfigError("invalid configuration:\n  saliency.example: test split has only " +
                      std::to_string(data.splits.test.size()) + " examples");
  }
  LoadedModel m = load_model(model_path(c, s));
  const Example& ex = data.splits.test.examples[idx];
  const Tensor map = saliency(m.net, ex.input, s["output"]);
  make_output_dir(c.out_dir);
  save_tensor((c.out_dir / "saliency.sgt").string(), map);
  save_tensor((c.out_dir / "saliency_input.sgt").string(), ex.input);
  double peak = 0.0;
  std::size_t where = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] > peak) {
      peak = map[i];
      where = i;
    }
  }
  json report = report_header(c, "saliency");
  report["example"] = idx;
  report["output"] = s["output"];
  report["shape"] = map.shape();
  report["max"] = peak;
  report["argmax"] = where;
  report["sum"] = sum(map);
  write_json(c.out_dir / "saliency.json", report);
  c.say("saliency written; peak " + fixed(peak, 6) + " at element " + std::to_string(where));
  return kOk;
}

int cmd_ablate(const Context& c) {
  const RunConfig& cfg = c.cfg;
  require_classification(cfg, "ablate");
  Prepared data = prepare_data(cfg);
  AblationBase base{cfg.architecture, cfg.train, data.splits.train, data.splits.val, data.splits.test, cfg.task};
  const auto toggles = cfg.normalized["ablate"]["toggles"].get<std::vector<std::string>>();
  const auto rows = ablate(base, toggles);
  make_output_dir(c.out_dir);
  {
    auto f = open_out(c.out_dir / "ablation.csv");
    write_ablation_csv(f, rows);
  }
  json report = report_header(c, "ablate");
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"variant", r.variant}, {"metrics", to_json(r.metrics)}, {"epochs", r.history.epochs.size()}});
    c.say(r.variant + ": test accuracy " + fixed(r.metrics.accuracy));
  }
  report["variants"] = table;
  write_json(c.out_dir / "ablate.json", report);
  return kOk;
}

int cmd_rnn_train(const Context& c) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& cfg = c.cfg;
  if (cfg.task != Task::sequence || cfg.input_shape.size() != 2) {
    throw ConfigError("invalid configuration:\n  data: rnn-train needs a sequence dataset with [T, n] inputs");
  }
  const json& r = cfg.normalized["rnn"];
  const Dataset ds = materialize_dataset(cfg);
  Rng init(Rng::derive(cfg.seed, "init"));
  RnnCell cell = random_rnn_cell(cfg.input_shape[1], r["hidden"], cfg.target_shape.back(), init);
  SequenceTrainConfig sc;
  sc.steps = r["steps"];
  sc.batch_size = r["batch_size"];
  sc.learning_rate = r["learning_rate"];
  sc.optimizer = optimizer_kind_from_string(r["optimizer"]);
  sc.target_accuracy = r["target_accuracy"];
  sc.eval_every = r["eval_every"];
  sc.seed = cfg.seed;
  make_output_dir(c.out_dir);
  const SequenceHistory h = train_sequence(cell, ds, sc);
  save_rnn_cell((c.out_dir / "cell.sgr").string(), cell);
  {
    auto f = open_out(c.out_dir / "history.csv");
    f << "step,loss,accuracy\n" << std::setprecision(17);
    for (const auto& rec : h.records) f << rec.step << ',' << rec.loss << ',' << rec.accuracy << '\n';
  }
  json report = report_header(c, "rnn-train");
  report["steps_run"] = h.steps_run;
  report["sequence_accuracy"] = h.final_accuracy;
  report["sequences"] = ds.size();
  report["duration_seconds"] = seconds_since(start);
  write_json(c.out_dir / "report.json", report);
  c.say("sequence accuracy " + fixed(h.final_accuracy) + " after " + std::to_string(h.steps_run) + " steps");
  return kOk;
}

std::vector<double> column_means(const Tensor& rows) {
  std::vector<double> m(rows.extent(1), 0.0);
  for (std::size_t i = 0; i < rows.extent(0); ++i) {
    for (std::size_t j = 0; j < rows.extent(1); ++j) m[j] += rows.at(i, j);
  }
  for (auto& v : m) v /= static_cast<double>(rows.extent(0));
  return m;
}

Tensor generative_rows(const RunConfig& cfg, const std::string& command) {
  if (cfg.data.generator == "parity" || cfg.data.generator == "blobs") {
    throw ConfigError("invalid configuration:\n  data: " + command + " needs mixture, shapes or tensor data");
  }
  return materialize_rows(cfg);
}

int cmd_gan_train(const Context& c) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& cfg = c.cfg;
  const json& g = cfg.normalized["gan"];
  const Tensor rows = generative_rows(cfg, "gan-train");
  GanPair pair = make_gan(g["noise"], rows.extent(1), g["generator_hidden"], g["discriminator_hidden"], cfg.seed);
  GanTrainConfig tc;
  tc.steps = g["steps"];
  tc.batch_size = g["batch_size"];
  tc.generator_lr = g["generator_lr"];
  tc.discriminator_lr = g["discriminator_lr"];
  tc.optimizer = optimizer_kind_from_string(g["optimizer"]);
  tc.seed = cfg.seed;
  make_output_dir(c.out_dir);
  const GanHistory h = train_gan(pair, rows, tc);
  Rng sample_rng(Rng::derive(cfg.seed, "sample"));
  const Tensor samples = gan_sample(pair, g["samples"], sample_rng);
  const double d_acc = discriminator_accuracy(pair, rows, sample_rng);
  save_model((c.out_dir / "generator.sgm").string(), pair.generator, Task::binary);
  save_model((c.out_dir / "discriminator.sgm").string(), pair.discriminator, Task::binary);
  save_tensor((c.out_dir / "samples.sgt").string(), samples);
  {
    auto f = open_out(c.out_dir / "history.csv");
    h.write_csv(f);
  }
  json report = report_header(c, "gan-train");
  report["data_mean"] = column_means(rows);
  report["sample_mean"] = column_means(samples);
  report["discriminator_accuracy"] = d_acc;
  report["duration_seconds"] = seconds_since(start);
  write_json(c.out_dir / "report.json", report);
  c.say("discriminator accuracy " + fixed(d_acc) + "; samples written");
  return kOk;
}

int cmd_vae_train(const Context& c) {
  const auto start = std::chrono::steady_clock::now();
  const RunConfig& cfg = c.cfg;
  const json& v = cfg.normalized["vae"];
  const Tensor rows = generative_rows(cfg, "vae-train");
  AutoencoderPair pair = make_autoencoder(rows.extent(1), v["latent"], v["hidden"], v["variational"], v["beta"], cfg.seed);
  AeTrainConfig tc;
  tc.steps = v["steps"];
  tc.batch_size = v["batch_size"];
  tc.learning_rate = v["learning_rate"];
  tc.optimizer = optimizer_kind_from_string(v["optimizer"]);
  tc.seed = cfg.seed;
  make_output_dir(c.out_dir);
  const AeHistory h = train_autoencoder(pair, rows, tc);
  Rng sample_rng(Rng::derive(cfg.seed, "sample"));
  const Tensor samples = vae_generate(pair, v["samples"], sample_rng);
  save_model((c.out_dir / "encoder.sgm").string(), pair.encoder, Task::binary);
  save_model((c.out_dir / "decoder.sgm").string(), pair.decoder, Task::binary);
  save_tensor((c.out_dir / "samples.sgt").string(), samples);
  {
    auto f = open_out(c.out_dir / "history.csv");
    h.write_csv(f);
  }
  json report = report_header(c, "vae-train");
  report["final"] = {{"reconstruction", h.records.back().reconstruction},
                     {"latent", h.records.back().latent},
                     {"total", h.records.back().total}};
  report["duration_seconds"] = seconds_since(start);
  write_json(c.out_dir / "report.json", report);
  c.say("final reconstruction loss " + fixed(h.records.back().reconstruction, 6));
  return kOk;
}

int cmd_synth_data(const Context& c) {
  const RunConfig& cfg = c.cfg;
  if (cfg.data.generator.empty()) throw ConfigError("invalid configuration:\n  data.generator: synth-data needs a generator");
  if (cfg.data.generator == "mixture") {
    const Tensor rows = materialize_rows(cfg);
    make_output_dir(c.out_dir);
    save_tensor((c.out_dir / "mixture.sgt").string(), rows);
    c.say("wrote " + std::to_string(rows.extent(0)) + " mixture samples");
    return kOk;
  }
  const Dataset ds = materialize_dataset(cfg);
  make_output_dir(c.out_dir);
  save_dataset(ds, (c.out_dir / "dataset.sgd").string());
  c.say("wrote " + std::to_string(ds.size()) + " examples (" + ds.note + ")");
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tinydl: small neural networks from scratch"};
  app.require_subcommand(1);
  Options opt;
  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const Context&);
  };
  const Entry entries[] = {
      {"train", "train a network and evaluate it on the test split", cmd_train},
      {"eval", "evaluate a saved model on the test split", cmd_eval},
      {"check", "validate a config and print the layer shape table", cmd_check},
      {"gradcheck", "compare analytic and numeric gradients", cmd_gradcheck},
      {"saliency", "input-gradient magnitudes for one test example", cmd_saliency},
      {"ablate", "train variants with components removed", cmd_ablate},
      {"rnn-train", "train a recurrent cell on sequence data", cmd_rnn_train},
      {"gan-train", "train a generator/discriminator pair", cmd_gan_train},
      {"vae-train", "train an autoencoder or variational autoencoder", cmd_vae_train},
      {"synth-data", "write a generated dataset", cmd_synth_data},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", opt.config, "run configuration (JSON)")->required();
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
    subs.emplace_back(sub, &e);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    const int code = app.exit(e, out, help);
    err << help.str();
    return code == 0 ? kOk : kConfigError;
  }
  try {
    for (const auto& [sub, entry] : subs) {
      if (sub->parsed()) {
        const Context ctx = prepare(opt, out);
        return entry->fn(ctx);
      }
    }
    return kConfigError;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const Error& e) {
    // Configuration, dimension, state and unsupported-operation errors.
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
}

}  // namespace tinydl::cli
