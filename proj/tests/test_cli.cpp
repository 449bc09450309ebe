#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "../tools/commands.hpp"
#include "../tools/config.hpp"
#include "helpers.hpp"
#include "tinydl/data.hpp"

using namespace tinydl;
using tinydl::cli::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tinydl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), {}};
}

json blob_config() {
  return {{"data", {{"generator", "blobs"}, {"count", 80}}},
          {"architecture", {{"preset", "mlp"}, {"hidden", {4}}}},
          {"train", {{"epochs", 3}, {"learning_rate", 0.05}}}};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and bad invocations") {
  CHECK(run_cli({"--help"}).code == cli::kOk);
  CHECK(run_cli({}).code == cli::kConfigError);
  CHECK(run_cli({"train"}).code == cli::kConfigError);
  CHECK(run_cli({"train", "--config", "/nonexistent/config.json"}).code == cli::kIoError);
}

TEST_CASE("train, eval and saliency on blobs") {
  const auto dir = tinydl::test::scratch_dir("cli_train");
  json cfg = blob_config();
  cfg["output"] = (dir / "run").string();
  const std::string path = write_config(dir, "blobs", cfg);

  const Result t = run_cli({"train", "--config", path});
  REQUIRE(t.code == cli::kOk);
  CHECK(t.out.find("coin 0.5000") != std::string::npos);
  for (const char* f : {"model.sgm", "history.csv", "report.json"}) CHECK(fs::exists(dir / "run" / f));
  const json report = json::parse(slurp(dir / "run" / "report.json"));
  CHECK(report["epochs_run"] == 3);
  CHECK(report["metrics"]["coin_baseline"] == 0.5);

  CHECK(run_cli({"eval", "--config", path}).code == cli::kOk);
  CHECK(fs::exists(dir / "run" / "eval.json"));
  CHECK(run_cli({"saliency", "--config", path, "--quiet"}).code == cli::kOk);
  CHECK(fs::exists(dir / "run" / "saliency.sgt"));
}

TEST_CASE("training runs are reproducible") {
  const auto dir = tinydl::test::scratch_dir("cli_repro");
  const auto twice = [&](const std::string& command, json cfg, const std::vector<std::string>& files) {
    for (const char* run : {"a", "b"}) {
      cfg["output"] = (dir / (command + run)).string();
      REQUIRE(run_cli({command, "--config", write_config(dir, command, cfg), "--quiet"}).code == cli::kOk);
    }
    for (const auto& f : files) {
      CAPTURE(command);
      CAPTURE(f);
      CHECK(slurp(dir / (command + "a") / f) == slurp(dir / (command + "b") / f));
    }
  };
  twice("train", blob_config(), {"model.sgm", "history.csv"});
  twice("rnn-train",
        {{"data", {{"generator", "parity"}, {"length", 3}}}, {"rnn", {{"hidden", 4}, {"steps", 30}, {"eval_every", 10}}}},
        {"cell.sgr", "history.csv"});
  twice("gan-train",
        {{"data", {{"generator", "mixture"}, {"count", 200}}},
         {"gan", {{"steps", 30}, {"batch_size", 16}, {"samples", 20}}}},
        {"generator.sgm", "discriminator.sgm", "samples.sgt", "history.csv"});
  twice("vae-train",
        {{"data", {{"generator", "mixture"}, {"count", 200}}}, {"vae", {{"steps", 30}, {"hidden", {8}}}}},
        {"encoder.sgm", "decoder.sgm", "samples.sgt", "history.csv"});
  json ab = blob_config();
  ab["train"]["reg_strength"] = 0.01;
  ab["ablate"] = {{"toggles", {"l2"}}};
  twice("ablate", ab, {"ablation.csv"});
}

TEST_CASE("a different seed changes the model") {
  const auto dir = tinydl::test::scratch_dir("cli_seed");
  json cfg = blob_config();
  cfg["output"] = (dir / "a").string();
  const std::string path = write_config(dir, "c", cfg);
  REQUIRE(run_cli({"train", "--config", path, "--quiet"}).code == cli::kOk);
  REQUIRE(run_cli({"train", "--config", path, "--quiet", "--seed", "5", "--out", (dir / "b").string()}).code == cli::kOk);
  CHECK(slurp(dir / "a" / "model.sgm") != slurp(dir / "b" / "model.sgm"));
}

TEST_CASE("invalid configs fail before anything is written") {
  const auto dir = tinydl::test::scratch_dir("cli_invalid");
  json cfg = blob_config();
  cfg["output"] = (dir / "never").string();
  cfg["split"] = {{"train", 0.0}, {"val", 0.5}, {"test", 0.5}};
  const Result r = run_cli({"train", "--config", write_config(dir, "zero", cfg)});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("split.train") != std::string::npos);
  CHECK(!fs::exists(dir / "never"));

  json typo = blob_config();
  typo["output"] = (dir / "never").string();
  typo["train"]["epoch"] = 3;
  typo["train"]["learning_rate"] = -1;
  const Result t = run_cli({"train", "--config", write_config(dir, "typo", typo)});
  CHECK(t.code == cli::kConfigError);
  CHECK(t.err.find("train.epoch: unknown key") != std::string::npos);
  CHECK(t.err.find("train.learning_rate") != std::string::npos);
  CHECK(!fs::exists(dir / "never"));

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run_cli({"check", "--config", (dir / "broken.json").string()}).code == cli::kConfigError);
}

TEST_CASE("check prints the shape table") {
  const auto dir = tinydl::test::scratch_dir("cli_check");
  const Result r = run_cli({"check", "--config", write_config(dir, "tools", {{"data", {{"generator", "tools"}}}})});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("64x64x3") != std::string::npos);
  std::istringstream lines(r.out);
  std::string line, last_layer;
  while (std::getline(lines, line))
    if (line.rfind("total", 0) != 0 && !line.empty()) last_layer = line;
  CHECK(last_layer.find(" 7 ") != std::string::npos);
  CHECK(r.out.find("total parameters") != std::string::npos);
}

TEST_CASE("a 227x227x3 image flattens to 154587 values") {
  const auto dir = tinydl::test::scratch_dir("cli_flatten");
  Dataset ds;
  ds.task = Task::binary;
  for (int i = 0; i < 3; ++i) ds.examples.push_back({Tensor({3, 227, 227}), Tensor({1})});
  save_dataset(ds, (dir / "big.sgd").string());
  const json cfg = {{"data", {{"path", (dir / "big.sgd").string()}}},
                    {"architecture",
                     {{"layers", {{{"type", "flatten"}}, {{"type", "dense"}, {"units", 1}}, {{"type", "sigmoid"}}}}}}};
  const Result r = run_cli({"check", "--config", write_config(dir, "flat", cfg)});
  REQUIRE(r.code == cli::kOk);
  CHECK(r.out.find("227x227x3") != std::string::npos);
  CHECK(r.out.find("154587") != std::string::npos);
}

TEST_CASE("an oversized kernel names the offending layer") {
  const auto dir = tinydl::test::scratch_dir("cli_kernel");
  const json cfg = {{"data", {{"generator", "shapes"}}},
                    {"architecture",
                     {{"layers",
                       {{{"type", "conv2d"}, {"filters", 2}, {"kernel", 3}},
                        {{"type", "conv2d"}, {"filters", 2}, {"kernel", 7}}}}}}};
  const Result r = run_cli({"check", "--config", write_config(dir, "k7", cfg)});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("layer 1") != std::string::npos);
}

TEST_CASE("fingerprints") {
  const json base = blob_config();
  const std::string fp = cli::fingerprint(cli::normalize_config(base));
  CHECK(fp.size() == 16);
  CHECK(cli::fingerprint(cli::normalize_config(base)) == fp);
  json moved = base;
  moved["output"] = "elsewhere";
  CHECK(cli::fingerprint(cli::normalize_config(moved)) == fp);
  json explicit_defaults = base;
  explicit_defaults["train"]["patience"] = 5;
  CHECK(cli::fingerprint(cli::normalize_config(explicit_defaults)) == fp);

  std::set<std::string> seen{fp};
  std::size_t variants = 1;
  for (int seed = 1; seed <= 20; ++seed) {
    json v = base;
    v["seed"] = seed;
    seen.insert(cli::fingerprint(cli::normalize_config(v)));
    ++variants;
  }
  for (double lr : {0.01, 0.02, 0.1, 0.2}) {
    json v = base;
    v["train"]["learning_rate"] = lr;
    seen.insert(cli::fingerprint(cli::normalize_config(v)));
    ++variants;
  }
  CHECK(seen.size() == variants);
}

TEST_CASE("gradcheck exit codes") {
  const auto dir = tinydl::test::scratch_dir("cli_gradcheck");
  json cfg = blob_config();
  cfg["output"] = (dir / "gc").string();
  const Result ok = run_cli({"gradcheck", "--config", write_config(dir, "gc", cfg)});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.rfind("PASS", 0) == 0);
  CHECK(json::parse(slurp(dir / "gc" / "gradcheck.json"))["pass"] == true);

  cfg["gradcheck"] = {{"tolerance", 1e-30}};
  CHECK(run_cli({"gradcheck", "--config", write_config(dir, "strict", cfg)}).code == cli::kCheckFailed);
  cfg["gradcheck"] = {{"eps", 0.5}};
  CHECK(run_cli({"gradcheck", "--config", write_config(dir, "eps", cfg)}).code == cli::kConfigError);
}

TEST_CASE("divergent training exits with a numeric error") {
  const auto dir = tinydl::test::scratch_dir("cli_diverge");
  json cfg = blob_config();
  cfg["output"] = (dir / "d").string();
  cfg["train"] = {{"epochs", 5}, {"optimizer", "gd"}, {"learning_rate", 1e200}, {"loss", "mean_squared_error"}};
  const Result r = run_cli({"train", "--config", write_config(dir, "d", cfg)});
  CHECK(r.code == cli::kNumericError);
  CHECK(fs::exists(dir / "d" / "history.csv"));
}

TEST_CASE("synth-data writes loadable datasets") {
  const auto dir = tinydl::test::scratch_dir("cli_synth");
  json cfg = {{"data", {{"generator", "segmentation"}, {"count", 5}}}, {"output", (dir / "seg").string()}};
  REQUIRE(run_cli({"synth-data", "--config", write_config(dir, "seg", cfg), "--quiet"}).code == cli::kOk);
  const Dataset ds = load_dataset((dir / "seg" / "dataset.sgd").string());
  CHECK(ds.size() == 5);
  CHECK(ds.task == Task::per_pixel);

  cfg = {{"data", {{"generator", "mixture"}, {"count", 50}}}, {"output", (dir / "mix").string()}};
  REQUIRE(run_cli({"synth-data", "--config", write_config(dir, "mix", cfg), "--quiet"}).code == cli::kOk);
  CHECK(load_tensor((dir / "mix" / "mixture.sgt").string()).shape() == Shape{50, 2});
}

}
