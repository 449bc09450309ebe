#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tinydl/errors.hpp"
#include "tinydl/metrics.hpp"

namespace tinydl::cli {

namespace {

using Errors = std::vector<std::string>;

const char* const kGenerators[] = {"blobs", "tools", "segmentation", "shapes", "parity", "mixture"};

json data_defaults(const std::string& generator) {
  if (generator == "blobs") return {{"generator", generator}, {"count", 500}, {"separation", 2.0}};
  if (generator == "tools") return {{"generator", generator}, {"count", 2000}};
  if (generator == "segmentation") return {{"generator", generator}, {"count", 600}};
  if (generator == "shapes") return {{"generator", generator}, {"count", 1000}};
  if (generator == "parity") return {{"generator", generator}, {"length", 8}, {"count", 0}};
  return {{"generator", generator}, {"count", 2000}};
}

std::string implied_task(const json& data) {
  if (!data.contains("generator")) return "auto";
  const std::string g = data["generator"];
  if (g == "blobs") return "binary";
  if (g == "tools") return "multilabel";
  if (g == "segmentation") return "per_pixel";
  if (g == "shapes") return "multiclass";
  if (g == "parity") return "sequence";
  return "none";
}

std::string implied_architecture(const json& data) {
  if (!data.contains("generator")) return "mlp";
  const std::string g = data["generator"];
  if (g == "tools") return "alexnet-mini";
  if (g == "segmentation") return "segmenter-mini";
  if (g == "shapes") return "vgg-mini";
  return "mlp";
}

json section_defaults(const std::string& section) {
  if (section == "train") {
    return {{"epochs", 50},          {"patience", 5},        {"restore_best", true},
            {"loss", "auto"},        {"optimizer", "adaptive"}, {"learning_rate", 0.05},
            {"reg_strength", 0.0},   {"batch_size", 32},     {"shuffle", true}};
  }
  if (section == "split") return {{"train", 0.7}, {"val", 0.15}, {"test", 0.15}};
  if (section == "augment") return {{"max_rotation_deg", 15.0}, {"max_translation", 4}, {"probability", 0.5}};
  if (section == "gradcheck") {
    return {{"eps", 1e-6}, {"tolerance", 1e-5}, {"examples", 3}, {"max_per_tensor", 0}};
  }
  if (section == "saliency") return {{"model", nullptr}, {"example", 0}, {"output", 0}};
  if (section == "ablate") return {{"toggles", json::array()}};
  if (section == "eval") return {{"model", nullptr}};
  if (section == "rnn") {
    return {{"hidden", 16},          {"steps", 2000},         {"batch_size", 16},
            {"learning_rate", 0.1},  {"optimizer", "adaptive"}, {"target_accuracy", 0.0},
            {"eval_every", 50}};
  }
  if (section == "gan") {
    return {{"noise", 2},
            {"generator_hidden", {16, 16}},
            {"discriminator_hidden", {16, 16}},
            {"steps", 5000},
            {"batch_size", 64},
            {"generator_lr", 0.05},
            {"discriminator_lr", 0.05},
            {"optimizer", "adaptive"},
            {"samples", 1000}};
  }
  if (section == "vae") {
    return {{"latent", 1},           {"hidden", {32}},        {"beta", 1.0},
            {"variational", true},   {"steps", 2000},         {"batch_size", 32},
            {"learning_rate", 0.05}, {"optimizer", "adaptive"}, {"samples", 100}};
  }
  return json::object();
}

// Copies raw keys over defaults; keys the defaults do not know are errors.
void merge_section(const json& raw, json& out, const std::string& path, Errors& errors) {
  if (!raw.is_object()) {
    errors.push_back(path + ": must be an object");
    return;
  }
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    if (!out.contains(it.key())) {
      errors.push_back(path + "." + it.key() + ": unknown key");
      continue;
    }
    out[it.key()] = it.value();
  }
}

bool is_uint(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

void check_uint(const json& sec, const std::string& key, const std::string& path, std::size_t min, Errors& errors) {
  const json& v = sec.at(key);
  if (!is_uint(v) || v.get<std::uint64_t>() < min) {
    errors.push_back(path + "." + key + ": must be an integer >= " + std::to_string(min));
  }
}

constexpr double kUnbounded = std::numeric_limits<double>::max();

void check_number(const json& sec, const std::string& key, const std::string& path, double lo, double hi,
                  Errors& errors) {
  const json& v = sec.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < lo || v.get<double>() > hi) {
    std::ostringstream os;
    os << path << "." << key << ": must be a ";
    if (hi == kUnbounded) os << "finite number >= " << lo;
    else os << "number in [" << lo << ", " << hi << "]";
    errors.push_back(os.str());
  }
}

void check_bool(const json& sec, const std::string& key, const std::string& path, Errors& errors) {
  if (!sec.at(key).is_boolean()) errors.push_back(path + "." + key + ": must be true or false");
}

void check_uint_list(const json& sec, const std::string& key, const std::string& path, Errors& errors) {
  const json& v = sec.at(key);
  bool ok = v.is_array();
  if (ok) {
    for (const auto& e : v) ok = ok && is_uint(e) && e.get<std::uint64_t>() > 0;
  }
  if (!ok) errors.push_back(path + "." + key + ": must be a list of positive integers");
}

void check_optimizer(const json& sec, const std::string& path, Errors& errors) {
  try {
    optimizer_kind_from_string(sec.at("optimizer").get<std::string>());
  } catch (const std::exception&) {
    errors.push_back(path + ".optimizer: must be \"gd\" or \"adaptive\"");
  }
}

void check_optional_path(const json& sec, const std::string& key, const std::string& path, Errors& errors) {
  const json& v = sec.at(key);
  if (!v.is_null() && !v.is_string()) errors.push_back(path + "." + key + ": must be a path string or null");
}

json normalize_data(const json& raw, Errors& errors) {
  if (!raw.is_object()) {
    errors.push_back("data: must be an object");
    return data_defaults("blobs");
  }
  int sources = 0;
  for (const char* k : {"generator", "path", "csv", "tensor"}) sources += raw.contains(k);
  if (sources != 1) {
    errors.push_back("data: exactly one of generator, path, csv or tensor is required");
    return data_defaults("blobs");
  }
  json out;
  if (raw.contains("generator")) {
    const json& g = raw["generator"];
    bool known = false;
    for (const char* name : kGenerators) known = known || (g.is_string() && g.get<std::string>() == name);
    if (!known) {
      errors.push_back("data.generator: unknown generator " + g.dump());
      return data_defaults("blobs");
    }
    out = data_defaults(g.get<std::string>());
  } else {
    for (const char* k : {"path", "csv", "tensor"}) {
      if (raw.contains(k)) out = {{k, ""}};
    }
  }
  merge_section(raw, out, "data", errors);
  for (const char* k : {"path", "csv", "tensor"}) {
    if (out.contains(k) && (!out[k].is_string() || out[k].get<std::string>().empty())) {
      errors.push_back(std::string("data.") + k + ": must be a non-empty path");
    }
  }
  if (out.contains("count")) {
    const bool parity = out.value("generator", "") == "parity";
    check_uint(out, "count", "data", parity ? 0 : 1, errors);
  }
  if (out.contains("length")) check_uint(out, "length", "data", 1, errors);
  if (out.contains("separation")) check_number(out, "separation", "data", 0.0, 1e6, errors);
  return out;
}

json normalize_architecture(const json& raw, Errors& errors) {
  json a;
  if (raw.is_string()) {
    a = {{"preset", raw}};
  } else if (raw.is_object()) {
    a = raw;
    if (!a.contains("preset")) a["preset"] = "custom";
  } else {
    errors.push_back("architecture: must be a preset name or an object");
    return {{"preset", "mlp"}, {"hidden", {16, 16}}};
  }
  if (!a["preset"].is_string()) {
    errors.push_back("architecture.preset: must be a string");
    return a;
  }
  const std::string p = a["preset"];
  json out;
  if (p == "mlp") {
    out = {{"preset", p}, {"hidden", {16, 16}}};
  } else if (p == "vgg-mini") {
    out = {{"preset", p}, {"base", 8}, {"blocks", 2}};
  } else if (p == "alexnet-mini" || p == "segmenter-mini") {
    out = {{"preset", p}};
  } else if (p == "custom") {
    out = {{"preset", p}, {"layers", json::array()}};
  } else {
    errors.push_back("architecture.preset: unknown preset \"" + p + "\"");
    return a;
  }
  merge_section(a, out, "architecture", errors);
  if (p == "mlp") check_uint_list(out, "hidden", "architecture", errors);
  if (p == "vgg-mini") {
    check_uint(out, "base", "architecture", 1, errors);
    check_uint(out, "blocks", "architecture", 0, errors);
  }
  if (p == "custom") {
    if (!out["layers"].is_array() || out["layers"].empty()) {
      errors.push_back("architecture.layers: must be a non-empty list");
    } else {
      json layers = json::array();
      for (std::size_t i = 0; i < out["layers"].size(); ++i) {
        try {
          layers.push_back(to_json(layer_spec_from_json(out["layers"][i])));
        } catch (const Error& e) {
          errors.push_back("architecture.layers[" + std::to_string(i) + "]: " + e.what());
        }
      }
      out["layers"] = layers;
    }
  }
  return out;
}

std::string join_errors(const Errors& errors) {
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

}  // namespace

json normalize_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("invalid configuration: top level must be an object");
  Errors errors;
  static const char* const kTop[] = {"name",     "seed",     "output",    "task",     "data",  "architecture",
                                     "train",    "split",    "standardize", "augment", "freeze", "pretrained",
                                     "gradcheck", "saliency", "ablate",   "eval",     "rnn",   "gan", "vae"};
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    bool known = false;
    for (const char* k : kTop) known = known || it.key() == k;
    if (!known) errors.push_back(it.key() + ": unknown key");
  }

  json n;
  n["name"] = raw.value("name", json("run"));
  if (!n["name"].is_string()) errors.push_back("name: must be a string");
  n["seed"] = raw.value("seed", json(0));
  if (!is_uint(n["seed"])) errors.push_back("seed: must be a non-negative integer");
  n["output"] = raw.value("output", json("out"));
  if (!n["output"].is_string() || n["output"].get<std::string>().empty()) errors.push_back("output: must be a path");

  n["data"] = normalize_data(raw.value("data", json{{"generator", "blobs"}}), errors);

  n["task"] = raw.value("task", json(implied_task(n["data"])));
  if (!n["task"].is_string()) {
    errors.push_back("task: must be a string");
    n["task"] = "auto";
  } else if (n["task"] != "auto" && n["task"] != "none") {
    try {
      task_from_string(n["task"]);
    } catch (const Error&) {
      errors.push_back("task: unknown task " + n["task"].dump());
    }
  }

  n["architecture"] = normalize_architecture(raw.value("architecture", json(implied_architecture(n["data"]))), errors);

  for (const char* s : {"train", "split", "gradcheck", "saliency", "ablate", "eval", "rnn", "gan", "vae"}) {
    n[s] = section_defaults(s);
    if (raw.contains(s)) merge_section(raw[s], n[s], s, errors);
  }

  // train
  json& t = n["train"];
  check_uint(t, "epochs", "train", 1, errors);
  check_uint(t, "patience", "train", 0, errors);
  check_bool(t, "restore_best", "train", errors);
  check_bool(t, "shuffle", "train", errors);
  check_number(t, "learning_rate", "train", 0.0, kUnbounded, errors);
  check_number(t, "reg_strength", "train", 0.0, 1e6, errors);
  check_uint(t, "batch_size", "train", 1, errors);
  check_optimizer(t, "train", errors);
  if (!t["loss"].is_string()) {
    errors.push_back("train.loss: must be a string");
  } else if (t["loss"] == "auto") {
    const std::string task = n["task"].is_string() ? n["task"].get<std::string>() : "auto";
    if (task != "auto" && task != "none") {
      try {
        t["loss"] = to_string(default_loss(task_from_string(task)));
      } catch (const Error&) {
      }
    }
  } else {
    try {
      loss_kind_from_string(t["loss"]);
    } catch (const Error&) {
      errors.push_back("train.loss: unknown loss " + t["loss"].dump());
    }
  }

  // split
  json& sp = n["split"];
  for (const char* k : {"train", "val", "test"}) check_number(sp, k, "split", 0.0, 1.0, errors);
  if (sp["train"].is_number() && sp["val"].is_number() && sp["test"].is_number()) {
    const double tr = sp["train"], va = sp["val"], te = sp["test"];
    if (!(tr > 0.0)) errors.push_back("split.train: must be positive");
    if (!(va > 0.0)) errors.push_back("split.val: must be positive");
    if (!(te > 0.0)) errors.push_back("split.test: must be positive");
    if (std::abs(tr + va + te - 1.0) > 1e-9) errors.push_back("split: fractions must sum to 1");
  }

  n["standardize"] = raw.value("standardize", json(true));
  if (!n["standardize"].is_boolean()) errors.push_back("standardize: must be true or false");

  // augment: null / false (off), true (defaults) or an object
  const json aug = raw.value("augment", json(nullptr));
  if (aug.is_null() || aug == json(false)) {
    n["augment"] = nullptr;
  } else {
    n["augment"] = section_defaults("augment");
    if (aug.is_object()) {
      merge_section(aug, n["augment"], "augment", errors);
    } else if (aug != json(true)) {
      errors.push_back("augment: must be null, a boolean or an object");
    }
    check_number(n["augment"], "max_rotation_deg", "augment", 0.0, 180.0, errors);
    check_uint(n["augment"], "max_translation", "augment", 0, errors);
    check_number(n["augment"], "probability", "augment", 0.0, 1.0, errors);
  }

  n["freeze"] = raw.value("freeze", json::array());
  if (!n["freeze"].is_array()) {
    errors.push_back("freeze: must be a list of layer indices");
  } else {
    for (const auto& e : n["freeze"]) {
      if (!is_uint(e)) errors.push_back("freeze: layer indices must be non-negative integers");
    }
  }
  n["pretrained"] = raw.value("pretrained", json(nullptr));
  check_optional_path(n, "pretrained", "", errors);

  json& g = n["gradcheck"];
  check_number(g, "eps", "gradcheck", 1e-8, 1e-4, errors);
  check_number(g, "tolerance", "gradcheck", 0.0, 1.0, errors);
  check_uint(g, "examples", "gradcheck", 1, errors);
  check_uint(g, "max_per_tensor", "gradcheck", 0, errors);

  check_optional_path(n["saliency"], "model", "saliency", errors);
  check_uint(n["saliency"], "example", "saliency", 0, errors);
  check_uint(n["saliency"], "output", "saliency", 0, errors);
  check_optional_path(n["eval"], "model", "eval", errors);

  if (!n["ablate"]["toggles"].is_array()) {
    errors.push_back("ablate.toggles: must be a list of strings");
  } else {
    for (const auto& e : n["ablate"]["toggles"]) {
      if (!e.is_string()) errors.push_back("ablate.toggles: must be a list of strings");
    }
  }

  json& r = n["rnn"];
  for (const char* k : {"hidden", "steps", "batch_size"}) check_uint(r, k, "rnn", 1, errors);
  check_uint(r, "eval_every", "rnn", 0, errors);
  check_number(r, "learning_rate", "rnn", 0.0, kUnbounded, errors);
  check_number(r, "target_accuracy", "rnn", 0.0, 1.0, errors);
  check_optimizer(r, "rnn", errors);

  json& ga = n["gan"];
  for (const char* k : {"noise", "steps", "batch_size", "samples"}) check_uint(ga, k, "gan", 1, errors);
  check_uint_list(ga, "generator_hidden", "gan", errors);
  check_uint_list(ga, "discriminator_hidden", "gan", errors);
  check_number(ga, "generator_lr", "gan", 0.0, kUnbounded, errors);
  check_number(ga, "discriminator_lr", "gan", 0.0, kUnbounded, errors);
  check_optimizer(ga, "gan", errors);

  json& v = n["vae"];
  for (const char* k : {"latent", "steps", "batch_size", "samples"}) check_uint(v, k, "vae", 1, errors);
  check_uint_list(v, "hidden", "vae", errors);
  check_number(v, "beta", "vae", 0.0, 1e6, errors);
  check_bool(v, "variational", "vae", errors);
  check_number(v, "learning_rate", "vae", 0.0, kUnbounded, errors);
  check_optimizer(v, "vae", errors);

  if (!errors.empty()) throw ConfigError(join_errors(errors));
  return n;
}

std::string fingerprint(const json& normalized) {
  // The output directory does not influence results.
  json hashed = normalized;
  hashed.erase("output");
  const std::string text = hashed.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

namespace {

void generator_shapes(const DataSource& d, Shape& input, Shape& target) {
  if (d.generator == "blobs") {
    input = {2};
    target = {1};
  } else if (d.generator == "tools") {
    input = {3, kToolImageSize, kToolImageSize};
    target = {kToolClasses};
  } else if (d.generator == "segmentation") {
    input = {1, kSegImageSize, kSegImageSize};
    target = {kSegClasses, kSegImageSize, kSegImageSize};
  } else if (d.generator == "shapes") {
    input = {1, kShapeImageSize, kShapeImageSize};
    target = {kShapeClasses};
  } else if (d.generator == "parity") {
    input = {d.length, 1};
    target = {d.length, 1};
  } else {
    input = {2};
    target = {};
  }
}

bool classification(Task t) { return t != Task::sequence; }

void check_head(const Architecture& a, Task task, Errors& errors) {
  const LayerSpec& head = a.layers.back();
  const bool sigmoid = head.kind == LayerKind::activation && head.activation == Activation::sigmoid;
  const bool softmax = head.kind == LayerKind::softmax;
  if ((task == Task::binary || task == Task::multilabel) && !sigmoid) {
    errors.push_back("architecture: " + to_string(task) + " task needs a sigmoid head");
  }
  if ((task == Task::multiclass || task == Task::per_pixel) && !softmax) {
    errors.push_back("architecture: " + to_string(task) + " task needs a softmax head");
  }
}

Architecture resolve_architecture(const json& a, const Shape& input, const Shape& target, Task task,
                                  const std::string& name, Errors& errors) {
  const std::string p = a["preset"];
  Architecture arch;
  if (p == "mlp") {
    arch = mlp_preset(shape_size(input), a["hidden"].get<std::vector<std::size_t>>(), shape_size(target),
                      task == Task::multiclass ? LayerKind::softmax : LayerKind::activation);
    if (input.size() > 1) {
      LayerSpec f;
      f.kind = LayerKind::flatten;
      arch.layers.insert(arch.layers.begin(), f);
      arch.input_shape = input;
    }
  } else if (p == "vgg-mini") {
    if (input.size() != 3 || input[1] != input[2]) {
      errors.push_back("architecture: vgg-mini needs square [C,H,W] inputs, data provides " + to_string(input));
      return arch;
    }
    arch = vgg_mini_preset(input[0], input[1], a["base"], a["blocks"], shape_size(target));
  } else if (p == "custom") {
    arch.input_shape = input;
    for (const auto& l : a["layers"]) arch.layers.push_back(layer_spec_from_json(l));
  } else {
    arch = preset(p);
    if (arch.input_shape != input) {
      errors.push_back("architecture: " + p + " takes " + to_string(arch.input_shape) + " inputs but the data provides " +
                       to_string(input));
      return arch;
    }
  }
  arch.name = name;
  try {
    const auto shapes = infer_shapes(arch);
    if (shapes.back() != target) {
      errors.push_back("architecture: output " + to_string(shapes.back()) + " does not match targets " +
                       to_string(target));
    }
    check_head(arch, task, errors);
  } catch (const DimensionError& e) {
    errors.push_back(std::string("architecture.layers: ") + e.what());
  }
  return arch;
}

}  // namespace

RunConfig load_run_config(const json& raw) {
  RunConfig c;
  c.normalized = normalize_config(raw);
  const json& n = c.normalized;
  c.name = n["name"];
  c.seed = n["seed"];
  c.output = n["output"];

  const json& d = n["data"];
  c.data.generator = d.value("generator", "");
  c.data.path = d.value("path", "");
  c.data.csv = d.value("csv", "");
  c.data.tensor = d.value("tensor", "");
  c.data.count = d.value("count", std::size_t{0});
  c.data.length = d.value("length", std::size_t{0});
  c.data.separation = d.value("separation", 2.0);
  c.data.seed = Rng::derive(c.seed, "data");

  Errors errors;
  std::string task = n["task"];
  if (!c.data.generator.empty()) {
    generator_shapes(c.data, c.input_shape, c.target_shape);
  } else if (!c.data.path.empty() || !c.data.csv.empty()) {
    if (!c.data.csv.empty() && (task == "auto" || task == "none")) {
      throw ConfigError("invalid configuration:\n  task: required for CSV data");
    }
    const Dataset ds = !c.data.path.empty() ? load_dataset(c.data.path) : load_csv(c.data.csv, task_from_string(task));
    if (ds.empty()) throw ConfigError("invalid configuration:\n  data: dataset is empty");
    c.input_shape = ds.input_shape();
    c.target_shape = ds.target_shape();
    if (task == "auto") task = to_string(ds.task);
  } else {
    const Tensor rows = load_tensor(c.data.tensor);
    if (rows.rank() != 2) throw ConfigError("invalid configuration:\n  data.tensor: must hold [N, d] rows");
    c.input_shape = {rows.extent(1)};
  }

  if (task != "none" && task != "auto") {
    c.task = task_from_string(task);
    if (classification(c.task)) {
      c.architecture = resolve_architecture(n["architecture"], c.input_shape, c.target_shape, c.task, c.name, errors);
    }
  }

  const json& t = n["train"];
  c.train.epochs = t["epochs"];
  c.train.patience = t["patience"];
  c.train.restore_best = t["restore_best"];
  const std::string loss_name = t["loss"];
  c.train.loss = loss_name == "auto" ? LossKind::binary_cross_entropy : loss_kind_from_string(loss_name);
  if (loss_name == "auto" && task != "none" && task != "auto") c.train.loss = default_loss(c.task);
  c.train.optimizer = optimizer_kind_from_string(t["optimizer"]);
  c.train.learning_rate = t["learning_rate"];
  c.train.reg_strength = t["reg_strength"];
  c.train.batch_size = t["batch_size"];
  c.train.shuffle = t["shuffle"];
  c.train.seed = c.seed;
  if (!n["augment"].is_null()) {
    AugmentConfig a;
    a.max_rotation_deg = n["augment"]["max_rotation_deg"];
    a.max_translation = n["augment"]["max_translation"];
    a.probability = n["augment"]["probability"];
    if (c.input_shape.size() != 3) errors.push_back("augment: only image ([C,H,W]) inputs can be augmented");
    c.train.augment = a;
  }
  c.split = {n["split"]["train"], n["split"]["val"], n["split"]["test"], Rng::derive(c.seed, "split")};
  c.standardize = n["standardize"];
  c.freeze = n["freeze"].get<std::vector<std::size_t>>();
  for (auto i : c.freeze) {
    if (i >= c.architecture.layers.size()) {
      errors.push_back("freeze: layer index " + std::to_string(i) + " is out of range");
    }
  }
  c.pretrained = n["pretrained"].is_null() ? "" : n["pretrained"].get<std::string>();
  if (!errors.empty()) throw ConfigError(join_errors(errors));
  return c;
}

Dataset materialize_dataset(const RunConfig& cfg) {
  const DataSource& d = cfg.data;
  if (!d.path.empty()) return load_dataset(d.path);
  if (!d.csv.empty()) return load_csv(d.csv, cfg.task);
  if (d.generator == "blobs") return synth_blobs(d.count, d.seed, d.separation);
  if (d.generator == "tools") return synth_tools(d.count, d.seed);
  if (d.generator == "segmentation") return synth_segmentation(d.count, d.seed);
  if (d.generator == "shapes") return synth_shapes(d.count, d.seed);
  if (d.generator == "parity") return synth_parity(d.length, d.count, d.seed);
  throw ConfigError("data: source does not describe a labelled dataset");
}

Tensor materialize_rows(const RunConfig& cfg) {
  const DataSource& d = cfg.data;
  if (!d.tensor.empty()) return load_tensor(d.tensor);
  if (d.generator == "mixture") {
    Rng rng(d.seed);
    return sample_mixture2d(d.count, rng);
  }
  const Dataset ds = materialize_dataset(cfg);
  std::vector<Tensor> rows;
  for (const auto& ex : ds.examples) rows.push_back(flatten(ex.input));
  return stack(rows);
}

}  // namespace tinydl::cli
