#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tinydl/architecture.hpp"
#include "tinydl/data.hpp"
#include "tinydl/train.hpp"

namespace tinydl::cli {

using nlohmann::json;

/// Where examples come from: a generator, a dataset container, a CSV file or
/// a raw SGT1 tensor of rows (generative commands).
struct DataSource {
  std::string generator;  // blobs, tools, segmentation, shapes, parity, mixture; empty otherwise
  std::string path;       // dataset container
  std::string csv;
  std::string tensor;
  std::size_t count = 0;
  std::size_t length = 0;  // parity
  double separation = 2.0;  // blobs
  std::uint64_t seed = 0;   // derived from the run seed
};

/// Fully validated run configuration. `normalized` holds every field with
/// defaults materialized; the typed members are views of it.
struct RunConfig {
  json normalized;
  std::string name;
  std::uint64_t seed = 0;
  std::string output;
  DataSource data;
  Task task = Task::binary;
  Shape input_shape;
  Shape target_shape;
  Architecture architecture;
  TrainConfig train;
  SplitSpec split;
  bool standardize = true;
  std::vector<std::size_t> freeze;
  std::string pretrained;
};

/// Fills defaults and checks every field. Throws ConfigError whose message
/// lists each violation with its config path (e.g. "train.epochs: ...").
json normalize_config(const json& raw);

/// Normalizes, then resolves the data shapes and the architecture (shape
/// inference included). Reads dataset headers from disk when the data
/// source is a file; computes nothing else.
RunConfig load_run_config(const json& raw);

json read_config_file(const std::string& path);

/// FNV-1a of the canonical dump of the normalized config (which contains
/// the seed, but not the output directory), as 16 hex digits.
std::string fingerprint(const json& normalized);

/// Dataset described by the config (generator output or file contents).
Dataset materialize_dataset(const RunConfig& cfg);
/// Rows for the generative commands, [N, d].
Tensor materialize_rows(const RunConfig& cfg);

}  // namespace tinydl::cli
