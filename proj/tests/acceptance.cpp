// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "../tools/commands.hpp"
#include "../tools/config.hpp"
#include "helpers.hpp"
#include "oracle.hpp"
#include "tinydl/architecture.hpp"
#include "tinydl/data.hpp"
#include "tinydl/errors.hpp"
#include "tinydl/generative.hpp"
#include "tinydl/recurrent.hpp"
#include "tinydl/train.hpp"

using namespace tinydl;
using tinydl::cli::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "tinydl_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct CliRun {
  int code = -1;
  double seconds = 0.0;
  json report;
  fs::path out;
};

// Runs one subcommand in-process with `cfg` written to disk; outputs land in
// work_dir()/tag.
CliRun run_cli(const std::string& command, json cfg, const std::string& tag) {
  CliRun r;
  r.out = work_dir() / tag;
  cfg["output"] = r.out.string();
  const fs::path path = work_dir() / (tag + ".json");
  std::ofstream(path) << cfg.dump(2);
  const std::string p = path.string();
  const char* argv[] = {"tinydl", command.c_str(), "--config", p.c_str(), "--quiet"};
  std::ostringstream out, err;
  const auto t0 = Clock::now();
  r.code = cli::run(5, argv, out, err);
  r.seconds = seconds_since(t0);
  if (r.code != cli::kOk) std::fprintf(stderr, "%s %s: %s", command.c_str(), tag.c_str(), err.str().c_str());
  if (fs::exists(r.out / "report.json")) r.report = json::parse(std::ifstream(r.out / "report.json"));
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

LayerSpec spec(LayerKind kind, std::size_t units = 0, std::size_t kernel = 3, std::size_t stride = 1,
               std::size_t padding = 0) {
  LayerSpec s;
  s.kind = kind;
  s.units = units;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

Splits blob_splits(std::size_t count, std::uint64_t seed) {
  const Splits s = split(synth_blobs(count, seed), SplitSpec{0.7, 0.15, 0.15, seed});
  const Standardizer st = fit_standardizer(s.train);
  return {st.apply(s.train), st.apply(s.val), st.apply(s.test)};
}

double weight_norm(const Network& net) {
  double s = 0.0;
  for (const Tensor* w : net.regularized_weights()) s += sum_squares(*w);
  return s;
}

// --- criteria --------------------------------------------------------------------

Outcome gradient_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::uint64_t seeds = 100;
  double resolved = 0.0, strict = 0.0;
  std::size_t probes = 0, unresolved = 0, skipped = 0, cases = 0;
  std::string worst;
  const auto sweep = [&](const std::vector<std::string>& names,
                         const std::function<GradCheckResult(const std::string&, std::uint64_t)>& fn) {
    for (const auto& name : names) {
      ++cases;
      for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        const GradCheckResult r = fn(name, seed);
        if (r.resolved_max_rel_error > resolved) {
          resolved = r.resolved_max_rel_error;
          worst = name;
        }
        strict = std::max(strict, r.max_rel_error);
        probes += r.probes;
        unresolved += r.unresolved;
        skipped += r.skipped;
      }
    }
  };
  sweep(test::layer_cases(), test::layer_oracle);
  sweep(test::stack_cases(), test::stack_oracle);
  sweep(test::composite_cases(), test::composite_oracle);
  const double secs = seconds_since(t0);
  o.require(resolved < test::kOracleTol, "resolved error " + fmt("%.3g", resolved) + " in " + worst);
  o.require(secs < 60.0, "runtime");
  o.note(std::to_string(cases) + " cases x " + std::to_string(seeds) + " seeds, " + std::to_string(probes) +
         " probes, max rel error " + fmt("%.2e", resolved) + " above the rounding floor (" +
         std::to_string(unresolved) + " probes below it; including them " + fmt("%.2e", strict) + "), " +
         std::to_string(skipped) + " skipped at kinks, " + fmt("%.1fs", secs));
  return o;
}

Outcome layer_arithmetic() {
  Outcome o;
  const Architecture conv{"conv", {1, 5, 5}, {spec(LayerKind::conv2d, 1, 3)}};
  o.require(infer_shapes(conv).back() == Shape{1, 3, 3}, "5x5 conv 3x3 output");
  const Architecture dense{"dense", {1, 5, 5}, {spec(LayerKind::flatten), spec(LayerKind::dense, 1)}};
  o.require(param_count(conv) == 10, "conv neuron parameters");
  o.require(param_count(dense) == 26, "dense neuron parameters");
  const Architecture big{"big", {3, 227, 227}, {spec(LayerKind::flatten)}};
  o.require(infer_shapes(big).back() == Shape{154587}, "227x227x3 flatten");

  std::size_t checked = 0, rejected = 0;
  for (std::size_t h = 1; h <= 16; ++h)
    for (std::size_t k = 1; k <= 5; ++k)
      for (std::size_t s = 1; s <= 3; ++s)
        for (std::size_t p = 0; p <= 2; ++p) {
          const Architecture a{"p", {1, h, h}, {spec(LayerKind::conv2d, 2, k, s, p)}};
          if (k > h + 2 * p) {
            bool threw = false;
            try {
              infer_shapes(a);
            } catch (const DimensionError&) {
              threw = true;
            }
            o.require(threw, "oversized kernel accepted");
            ++rejected;
            continue;
          }
          const std::size_t expect = (h + 2 * p - k) / s + 1;
          const Shape want{2, expect, expect};
          o.require(conv_output_extent(h, k, s, p) == expect, "extent formula");
          o.require(infer_shapes(a).back() == want, "inferred shape");
          o.require(predict(build_network(a, h * 31 + k), Tensor({1, h, h}, 1.0)).shape() == want, "forward shape");
          ++checked;
        }
  o.note("3x3 output, 10 vs 26 parameters, 154587 values, " + std::to_string(checked) + " shape cases (" +
         std::to_string(rejected) + " rejected)");
  return o;
}

Outcome softmax_properties() {
  Outcome o;
  Rng rng(3);
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Tensor logits = test::random_tensor({1 + rng.below(20)}, rng, -100.0, 100.0);
    const Tensor p = softmax(logits);
    worst_sum = std::max(worst_sum, std::fabs(sum(p) - 1.0));
    const double c = rng.uniform(-100.0, 100.0);
    Tensor shifted = logits;
    for (auto& v : shifted.data()) v += c;
    worst_shift = std::max(worst_shift, max_abs_diff(softmax(shifted), p));
  }
  o.require(worst_sum <= 1e-12, "sum");
  o.require(worst_shift <= 1e-12, "shift invariance");
  o.note("10000 vectors, max |sum-1| " + fmt("%.2e", worst_sum) + ", max shift deviation " + fmt("%.2e", worst_shift));
  return o;
}

Outcome toy_classification() {
  Outcome o;
  const CliRun r = run_cli("train",
                           {{"data", {{"generator", "blobs"}, {"count", 500}}},
                            {"architecture", {{"preset", "mlp"}}},
                            {"split", {{"train", 0.7}, {"val", 0.15}, {"test", 0.15}}},
                            {"train", {{"epochs", 200}}}},
                           "blobs");
  o.require(r.code == cli::kOk, "exit code");
  if (r.code != cli::kOk) return o;
  const double acc = r.report["metrics"]["accuracy"];
  const double coin = r.report["metrics"]["coin_baseline"];
  const int epochs = r.report["epochs_run"];
  o.require(acc >= 0.95, "accuracy");
  o.require(coin == 0.5, "coin baseline");
  o.require(r.seconds < 10.0, "runtime");
  o.note("test accuracy " + fmt("%.4f", acc) + " after " + std::to_string(epochs) + " epochs, coin " +
         fmt("%.2f", coin) + ", " + fmt("%.1fs", r.seconds));
  return o;
}

Outcome tools_classification() {
  Outcome o;
  const CliRun r = run_cli(
      "train",
      {{"data", {{"generator", "tools"}, {"count", 2000}}},
       {"architecture", {{"preset", "alexnet-mini"}}},
       {"augment", {{"max_rotation_deg", 0.0}, {"max_translation", 6}, {"probability", 0.7}}},
       {"train",
        {{"epochs", 22}, {"patience", 0}, {"batch_size", 32}, {"learning_rate", 0.01}, {"reg_strength", 1e-4}}}},
      "tools");
  o.require(r.code == cli::kOk, "exit code");
  if (r.code != cli::kOk) return o;
  const double acc = r.report["metrics"]["accuracy"];
  const double untrained = r.report["baseline_metrics"]["accuracy"];
  o.require(acc >= 0.90, "per-label accuracy");
  o.require(untrained <= 0.55, "untrained accuracy");
  o.require(r.seconds < 300.0, "runtime");
  o.note("per-label accuracy " + fmt("%.4f", acc) + " vs untrained " + fmt("%.4f", untrained) + ", " +
         fmt("%.1fs", r.seconds));
  return o;
}

Outcome segmentation() {
  Outcome o;
  const CliRun r = run_cli("train",
                           {{"data", {{"generator", "segmentation"}, {"count", 600}}},
                            {"architecture", {{"preset", "segmenter-mini"}}},
                            {"train", {{"epochs", 10}, {"batch_size", 16}, {"learning_rate", 0.01}}}},
                           "segmentation");
  o.require(r.code == cli::kOk, "exit code");
  if (r.code != cli::kOk) return o;
  const double acc = r.report["metrics"]["accuracy"];
  const double majority = r.report["metrics"]["majority_baseline"];
  o.require(acc >= 0.90, "pixel accuracy");
  o.require(r.seconds < 300.0, "runtime");
  o.note("pixel accuracy " + fmt("%.4f", acc) + " vs majority background " + fmt("%.4f", majority) + ", " +
         fmt("%.1fs", r.seconds));
  return o;
}

Outcome regularization() {
  Outcome o;
  const Splits s = blob_splits(500, 1);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.patience = 0;
  cfg.seed = 7;
  Network plain = build_network(mlp_preset(2, {16, 16}, 1), 2);
  Network reg = plain;
  train(plain, s.train, s.val, cfg);
  cfg.reg_strength = 0.01;
  train(reg, s.train, s.val, cfg);
  const double n0 = weight_norm(plain), n1 = weight_norm(reg);
  o.require(n1 < n0, "weight norm");

  DropoutLayer drop(0.5);
  const Tensor ones({100}, 1.0);
  Rng rng(8);
  double total = 0.0;
  for (int m = 0; m < 10000; ++m) total += sum(drop.forward(ones, Mode::training, rng).output);
  const double ratio = total / (10000.0 * 100.0);
  o.require(std::fabs(ratio - 1.0) <= 0.02, "dropout expectation");

  Network net = build_network(mlp_preset(2, {8, 8}, 1), 3);
  const std::size_t head = net.size() - 2;
  std::vector<std::size_t> frozen;
  for (std::size_t i = 0; i < head; ++i) frozen.push_back(i);
  net.freeze(frozen);
  std::vector<std::uint64_t> before;
  for (std::size_t i = 0; i < net.size(); ++i) before.push_back(net.layer_checksum(i));
  cfg.reg_strength = 0.0;
  cfg.epochs = 5;
  train(net, s.train, s.val, cfg);
  bool unchanged = true;
  for (std::size_t i = 0; i < head; ++i) unchanged = unchanged && net.layer_checksum(i) == before[i];
  o.require(unchanged, "frozen layers changed");
  o.require(net.layer_checksum(head) != before[head], "trainable head did not move");
  o.note("sum w^2 " + fmt("%.4f", n1) + " with l2 vs " + fmt("%.4f", n0) + " without, dropout mean " +
         fmt("%.4f", ratio) + ", " + std::to_string(head) + " frozen layers bitwise unchanged");
  return o;
}

Outcome recurrent() {
  Outcome o;
  const CliRun r = run_cli("rnn-train",
                           {{"data", {{"generator", "parity"}, {"length", 8}}},
                            {"rnn",
                             {{"hidden", 16},
                              {"steps", 2000},
                              {"batch_size", 16},
                              {"learning_rate", 0.1},
                              {"target_accuracy", 0.99}}}},
                           "parity");
  o.require(r.code == cli::kOk, "exit code");
  if (r.code != cli::kOk) return o;
  const double acc = r.report["sequence_accuracy"];
  const int steps = r.report["steps_run"];
  o.require(acc >= 0.99, "sequence accuracy");
  o.require(steps <= 2000, "steps");
  o.require(r.seconds < 60.0, "runtime");

  double worst = 0.0;
  for (double w : {0.5, 1.5}) {
    RnnCell c = zero_rnn_cell(1, 1, 1);
    c.w_xh[0] = 1.0;
    c.w_hh[0] = w;
    c.w_hy[0] = 1.0;
    c.hidden = Activation::linear;
    const std::size_t length = 12;
    const auto norms = gradient_flow_profile(c, length, 3);
    for (std::size_t tau = 1; tau <= length; ++tau)
      worst = std::max(worst, std::fabs(norms[tau - 1] - std::pow(w, static_cast<double>(length - tau))));
  }
  o.require(worst <= 1e-9, "flow profile");
  o.note("8-step parity " + fmt("%.4f", acc) + " after " + std::to_string(steps) + " steps, " +
         fmt("%.1fs", r.seconds) + ", flow profile deviation " + fmt("%.1e", worst));
  return o;
}

Outcome generative() {
  Outcome o;
  const CliRun r = run_cli("gan-train", {{"data", {{"generator", "mixture"}, {"count", 2000}}}, {"gan", {{"steps", 5000}}}},
                           "gan");
  o.require(r.code == cli::kOk, "exit code");
  if (r.code != cli::kOk) return o;
  const auto& data_mean = r.report["data_mean"];
  const auto& sample_mean = r.report["sample_mean"];
  double gap = 0.0;
  for (std::size_t a = 0; a < 2; ++a)
    gap = std::max(gap, std::fabs(data_mean[a].get<double>() - sample_mean[a].get<double>()));
  const double d_acc = r.report["discriminator_accuracy"];
  o.require(gap <= 0.2, "sample mean");
  o.require(d_acc >= 0.4 && d_acc <= 0.6, "discriminator accuracy");

  bool zero = true;
  for (std::size_t n : {1, 2, 7}) zero = zero && latent_divergence(Tensor({n}), Tensor({n})) == 0.0;
  o.require(zero, "latent term at the prior");

  const AutoencoderPair pair = make_autoencoder(5, 2, {6}, true, 0.0, 11);
  Rng rng(11);
  const Tensor x = test::random_tensor({5}, rng);
  const Tensor no_noise({2});
  const AutoencoderGrads v = autoencoder_gradients(pair, x, AeMode::variational, &no_noise);
  const AutoencoderGrads p = autoencoder_gradients(pair, x, AeMode::plain);
  const auto same_values = [](const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k].shape() != b[k].shape() || max_abs_diff(a[k], b[k]) != 0.0) return false;
    return true;
  };
  const bool same = v.result.reconstruction.identical(p.result.reconstruction) && v.result.total == p.result.total &&
                    same_values(v.decoder, p.decoder) && same_values(v.encoder, p.encoder);
  o.require(same, "zero beta path");
  o.note("max per-axis mean gap " + fmt("%.3f", gap) + ", discriminator accuracy " + fmt("%.4f", d_acc) +
         ", latent term 0 at the prior, zero beta matches the plain path");
  return o;
}

Outcome determinism() {
  Outcome o;
  const json blobs = {{"data", {{"generator", "blobs"}, {"count", 200}}},
                      {"architecture", {{"preset", "mlp"}, {"hidden", {8}}}},
                      {"train", {{"epochs", 5}, {"reg_strength", 0.01}}}};
  json ablate = blobs;
  ablate["ablate"] = {{"toggles", {"l2"}}};
  const std::vector<std::tuple<std::string, json, std::vector<std::string>>> runs = {
      {"train", blobs, {"model.sgm", "history.csv"}},
      {"rnn-train",
       {{"data", {{"generator", "parity"}, {"length", 4}}}, {"rnn", {{"hidden", 8}, {"steps", 100}}}},
       {"cell.sgr", "history.csv"}},
      {"gan-train",
       {{"data", {{"generator", "mixture"}, {"count", 300}}}, {"gan", {{"steps", 100}}}},
       {"generator.sgm", "discriminator.sgm", "history.csv"}},
      {"vae-train",
       {{"data", {{"generator", "mixture"}, {"count", 300}}}, {"vae", {{"steps", 100}}}},
       {"encoder.sgm", "decoder.sgm", "history.csv"}},
      {"ablate", ablate, {"ablation.csv"}},
  };
  std::size_t files = 0;
  for (const auto& [command, cfg, outputs] : runs) {
    const CliRun a = run_cli(command, cfg, "det_" + command + "_a");
    const CliRun b = run_cli(command, cfg, "det_" + command + "_b");
    o.require(a.code == cli::kOk && b.code == cli::kOk, command + " exit code");
    for (const auto& f : outputs) {
      const std::string x = slurp(a.out / f), y = slurp(b.out / f);
      o.require(!x.empty() && x == y, command + " " + f);
      ++files;
    }
  }

  const SplitSpec sp{0.7, 0.15, 0.15, 9};
  const Dataset base = synth_blobs(200, 9);
  const Standardizer before = fit_standardizer(split(base, sp).train);
  const SplitIndices idx = split_indices(base.size(), sp);
  Dataset mutated = base;
  Rng rng(10);
  for (const auto* part : {&idx.val, &idx.test})
    for (std::size_t i : *part) mutated.examples[i].input = test::random_tensor({2}, rng, -1e6, 1e6);
  const Standardizer after = fit_standardizer(split(mutated, sp).train);
  o.require(after.mean.identical(before.mean) && after.stddev.identical(before.stddev), "standardizer leakage");

  EarlyStopper stopper(3);
  std::size_t stopped = 0;
  const std::vector<double> script{5, 4, 3, 3.5, 3.0, 3.2};
  for (std::size_t e = 0; e < script.size() && !stopped; ++e)
    if (stopper.update(script[e])) stopped = e + 1;
  o.require(stopped == 6 && stopper.best_epoch() == 3, "scripted early stop");

  const Splits s = blob_splits(200, 4);
  Network net = build_network(mlp_preset(2, {4}, 1), 1);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.patience = 2;
  cfg.learning_rate = 0.0;
  const TrainHistory h = train(net, s.train, s.val, cfg);
  o.require(h.epochs.size() == 3 && h.stop == StopReason::early_stop, "flat-loss early stop");

  o.note(std::to_string(runs.size()) + " subcommands, " + std::to_string(files) +
         " files bitwise identical, standardizer unaffected by val/test mutation, early stop at epoch " +
         std::to_string(stopped) + " (scripted) and " + std::to_string(h.epochs.size()) + " (flat loss)");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"gradient oracle", gradient_oracle},       {"layer arithmetic", layer_arithmetic},
      {"softmax", softmax_properties},            {"toy classification", toy_classification},
      {"tool classification", tools_classification}, {"segmentation", segmentation},
      {"regularization", regularization},         {"recurrent", recurrent},
      {"generative", generative},                 {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failed;
}
