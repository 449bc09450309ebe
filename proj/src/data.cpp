#include "tinydl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tinydl/errors.hpp"

namespace tinydl {

std::string to_string(Task task) {
  switch (task) {
    case Task::binary: return "binary";
    case Task::multiclass: return "multiclass";
    case Task::multilabel: return "multilabel";
    case Task::per_pixel: return "per_pixel";
    case Task::sequence: return "sequence";
  }
  return "?";
}

Task task_from_string(const std::string& name) {
  if (name == "binary") return Task::binary;
  if (name == "multiclass") return Task::multiclass;
  if (name == "multilabel") return Task::multilabel;
  if (name == "per_pixel" || name == "per-pixel") return Task::per_pixel;
  if (name == "sequence") return Task::sequence;
  throw ConfigError("unknown task '" + name + "'");
}

const Shape& Dataset::input_shape() const {
  if (examples.empty()) throw StateError("empty dataset has no input shape");
  return examples.front().input.shape();
}

const Shape& Dataset::target_shape() const {
  if (examples.empty()) throw StateError("empty dataset has no target shape");
  return examples.front().target.shape();
}

void Dataset::validate() const {
  if (examples.empty()) return;
  for (std::size_t i = 1; i < examples.size(); ++i) {
    if (examples[i].input.shape() != input_shape() || examples[i].target.shape() != target_shape()) {
      throw DimensionError("dataset example " + std::to_string(i) + " has shape " +
                           to_string(examples[i].input.shape()) + " -> " +
                           to_string(examples[i].target.shape()) + ", expected " +
                           to_string(input_shape()) + " -> " + to_string(target_shape()));
    }
  }
}

// --- splits --------------------------------------------------------------------

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  for (double f : {spec.train, spec.val, spec.test}) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must each lie in (0, 1)");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (n < 3) throw ConfigError("split needs at least 3 examples");
  const auto portion = [n](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
  };
  const std::size_t n_val = portion(spec.val);
  const std::size_t n_test = portion(spec.test);
  if (n_val + n_test >= n) throw ConfigError("split leaves no training examples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::derive(spec.seed, "split"));
  rng.shuffle(std::span<std::size_t>(order));

  SplitIndices out;
  out.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                  order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  for (auto* v : {&out.train, &out.val, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds.size(), spec);
  const auto take = [&ds](const std::vector<std::size_t>& ids) {
    Dataset out;
    out.task = ds.task;
    out.note = ds.note;
    out.examples.reserve(ids.size());
    for (auto i : ids) out.examples.push_back(ds.examples[i]);
    return out;
  };
  return {take(idx.train), take(idx.val), take(idx.test)};
}

// --- standardization -----------------------------------------------------------

Standardizer fit_standardizer(const Dataset& train) {
  if (train.empty()) throw ConfigError("cannot fit a standardizer on an empty split");
  const Shape& shape = train.input_shape();
  Tensor mean(shape), var(shape);
  const double n = static_cast<double>(train.size());
  for (const auto& ex : train.examples) mean += ex.input;
  mean *= 1.0 / n;
  for (const auto& ex : train.examples) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = ex.input[i] - mean[i];
      var[i] += d * d;
    }
  }
  Tensor stddev(shape);
  for (std::size_t i = 0; i < var.size(); ++i) stddev[i] = std::max(std::sqrt(var[i] / n), kStdFloor);
  return {std::move(mean), std::move(stddev)};
}

Tensor Standardizer::apply(const Tensor& x) const {
  require_same_shape(x, mean, "standardize");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stddev[i];
  return out;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  Dataset out = ds;
  for (auto& ex : out.examples) ex.input = apply(ex.input);
  return out;
}

// --- augmentation --------------------------------------------------------------

Tensor rotate_nearest(const Tensor& image, double degrees) {
  if (image.rank() != 3) throw DimensionError("rotate expects [C,H,W], got " + to_string(image.shape()));
  if (degrees == 0.0) return image;
  const long c = static_cast<long>(image.extent(0));
  const long h = static_cast<long>(image.extent(1));
  const long w = static_cast<long>(image.extent(2));
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double ci = (h - 1) / 2.0, cj = (w - 1) / 2.0;
  Tensor out(image.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      // Inverse-map the destination pixel into the source.
      const double di = i - ci, dj = j - cj;
      const long si = std::lround(ci + cs * di + sn * dj);
      const long sj = std::lround(cj - sn * di + cs * dj);
      if (si < 0 || si >= h || sj < 0 || sj >= w) continue;
      for (long k = 0; k < c; ++k) out.at(k, i, j) = image.at(k, si, sj);
    }
  }
  return out;
}

Tensor translate(const Tensor& image, long dy, long dx) {
  if (image.rank() != 3) throw DimensionError("translate expects [C,H,W], got " + to_string(image.shape()));
  const long c = static_cast<long>(image.extent(0));
  const long h = static_cast<long>(image.extent(1));
  const long w = static_cast<long>(image.extent(2));
  Tensor out(image.shape());
  for (long k = 0; k < c; ++k)
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        const long si = i - dy, sj = j - dx;
        if (si >= 0 && si < h && sj >= 0 && sj < w) out.at(k, i, j) = image.at(k, si, sj);
      }
  return out;
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.max_rotation_deg < 0.0 || !(cfg.probability >= 0.0 && cfg.probability <= 1.0)) {
    throw ConfigError("augmentation bounds must be non-negative and probability in [0,1]");
  }
  if (!rng.bernoulli(cfg.probability)) return image;
  const double angle = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
  const long span = static_cast<long>(cfg.max_translation);
  const long dy = static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * span + 1))) - span;
  const long dx = static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * span + 1))) - span;
  Tensor out = rotate_nearest(image, angle);
  if (dy != 0 || dx != 0) out = translate(out, dy, dx);
  return out;
}

// --- file I/O ------------------------------------------------------------------

namespace {

constexpr const char* kDatasetMagic = "SGD1";

std::string shape_token(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape_token(const std::string& tok) {
  Shape s;
  std::stringstream ss(tok);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      s.push_back(std::stoul(part));
    } catch (const std::exception&) {
      throw LoadError(LoadError::Kind::manifest, "dataset manifest: bad shape '" + tok + "'");
    }
  }
  return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.empty()) throw ConfigError("cannot save an empty dataset");
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
  out << kDatasetMagic << " task=" << to_string(ds.task) << " count=" << ds.size()
      << " input=" << shape_token(ds.input_shape()) << " target=" << shape_token(ds.target_shape())
      << '\n';
  std::vector<Tensor> inputs, targets;
  inputs.reserve(ds.size());
  targets.reserve(ds.size());
  for (const auto& ex : ds.examples) {
    inputs.push_back(ex.input);
    targets.push_back(ex.target);
  }
  write_sgt1(out, stack(inputs));
  write_sgt1(out, stack(targets));
  if (!out) throw LoadError(LoadError::Kind::io, "write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw LoadError(LoadError::Kind::truncated, "dataset: missing manifest");
  std::istringstream ms(line);
  std::string magic;
  ms >> magic;
  if (magic != kDatasetMagic) throw LoadError(LoadError::Kind::magic, "dataset: bad magic '" + magic + "'");
  std::string task, count, input, target;
  std::string tok;
  while (ms >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw LoadError(LoadError::Kind::manifest, "dataset manifest: bad field '" + tok + "'");
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "task") task = value;
    else if (key == "count") count = value;
    else if (key == "input") input = value;
    else if (key == "target") target = value;
  }
  if (task.empty() || count.empty() || input.empty() || target.empty()) {
    throw LoadError(LoadError::Kind::manifest, "dataset manifest: missing field");
  }
  Dataset ds;
  try {
    ds.task = task_from_string(task);
  } catch (const ConfigError& e) {
    throw LoadError(LoadError::Kind::manifest, std::string("dataset manifest: ") + e.what());
  }
  std::size_t n = 0;
  try {
    n = std::stoul(count);
  } catch (const std::exception&) {
    throw LoadError(LoadError::Kind::manifest, "dataset manifest: bad count");
  }
  const Tensor xs = read_sgt1(in);
  const Tensor ys = read_sgt1(in);
  Shape xshape{n}, yshape{n};
  for (auto e : parse_shape_token(input)) xshape.push_back(e);
  for (auto e : parse_shape_token(target)) yshape.push_back(e);
  if (xs.shape() != xshape || ys.shape() != yshape) {
    throw LoadError(LoadError::Kind::manifest, "dataset manifest " + to_string(xshape) + "/" +
                                                   to_string(yshape) + " conflicts with tensors " +
                                                   to_string(xs.shape()) + "/" + to_string(ys.shape()));
  }
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.examples.push_back({unstack_one(xs, i), unstack_one(ys, i)});
  return ds;
}

Dataset load_csv(const std::string& path, Task task) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw LoadError(LoadError::Kind::truncated, "csv: missing header");
  std::vector<bool> is_target;
  {
    std::stringstream ss(line);
    std::string col;
    const std::string suffix = ":target";
    while (std::getline(ss, col, ',')) {
      while (!col.empty() && (col.back() == '\r' || col.back() == ' ')) col.pop_back();
      is_target.push_back(col.size() >= suffix.size() &&
                          col.compare(col.size() - suffix.size(), suffix.size(), suffix) == 0);
    }
  }
  const std::size_t n_targets = static_cast<std::size_t>(std::count(is_target.begin(), is_target.end(), true));
  const std::size_t n_inputs = is_target.size() - n_targets;
  if (n_targets == 0 || n_inputs == 0) {
    throw LoadError(LoadError::Kind::manifest, "csv: need at least one input and one ':target' column");
  }
  Dataset ds;
  ds.task = task;
  ds.note = "csv:" + path;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> xs, ys;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= is_target.size()) throw LoadError(LoadError::Kind::shape, "csv row " + std::to_string(row) + ": too many columns");
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw LoadError(LoadError::Kind::shape, "csv row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
      (is_target[col] ? ys : xs).push_back(v);
      ++col;
    }
    if (col != is_target.size()) throw LoadError(LoadError::Kind::shape, "csv row " + std::to_string(row) + ": too few columns");
    ds.examples.push_back({Tensor({n_inputs}, std::move(xs)), Tensor({n_targets}, std::move(ys))});
  }
  return ds;
}

}  // namespace tinydl
