#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinydl/rng.hpp"
#include "tinydl/tensor.hpp"

namespace tinydl {

enum class Task { binary, multiclass, multilabel, per_pixel, sequence };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

struct Example {
  Tensor input;
  Tensor target;
};

/// Examples with ground truth. Input shapes are uniform, as are target
/// shapes (checked by validate()).
struct Dataset {
  std::vector<Example> examples;
  Task task = Task::binary;
  std::string note;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  const Shape& input_shape() const;
  const Shape& target_shape() const;
  void validate() const;
};

// --- splits ------------------------------------------------------------------

struct SplitSpec {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Val and test sizes are round(fraction * n), at least one each; every
/// remaining example goes to train. Throws ConfigError on invalid
/// fractions or when train would end up empty.
Splits split(const Dataset& ds, const SplitSpec& spec);
/// Index-level view of split(): which original examples land where.
struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

// --- standardization -----------------------------------------------------------

inline constexpr double kStdFloor = 1e-8;

/// Per-feature (x - mean) / stddev with training-split statistics only.
struct Standardizer {
  Tensor mean;
  Tensor stddev;  // already floored at kStdFloor

  Tensor apply(const Tensor& x) const;
  Dataset apply(const Dataset& ds) const;
};

Standardizer fit_standardizer(const Dataset& train);

// --- augmentation --------------------------------------------------------------

struct AugmentConfig {
  double max_rotation_deg = 15.0;
  std::size_t max_translation = 4;
  double probability = 0.5;
};

/// Nearest-neighbour rotation about the image centre; samples falling
/// outside the source are zero.
Tensor rotate_nearest(const Tensor& image, double degrees);
/// Integer shift with zero fill (positive dy moves content down).
Tensor translate(const Tensor& image, long dy, long dx);
/// With probability cfg.probability: rotate by a uniform angle in
/// [-max, +max], then translate by uniform integer offsets.
Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

// --- file I/O ------------------------------------------------------------------

/// Container: manifest line, inputs SGT1 block [N, ...], targets SGT1 block.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Header row; columns whose name ends in ":target" are targets. Inputs and
/// targets come out rank-1.
Dataset load_csv(const std::string& path, Task task);

// --- synthetic generators ------------------------------------------------------

/// Two isotropic unit-variance blobs centred at +-(separation, separation),
/// balanced labels, binary target of extent 1.
Dataset synth_blobs(std::size_t count, std::uint64_t seed, double separation = 2.0);

/// 2-D Gaussian mixture samples (GAN data): two equally weighted components.
struct Mixture2d {
  double mean_a[2] = {2.0, 2.0};
  double mean_b[2] = {4.0, 1.0};
  double stddev = 0.3;
};
Tensor sample_mixture2d(std::size_t count, Rng& rng, const Mixture2d& mix = {});

inline constexpr std::size_t kToolClasses = 7;
inline constexpr std::size_t kToolImageSize = 64;

struct Glyph {
  std::size_t cls = 0;
  std::size_t row = 0;  // top-left corner
  std::size_t col = 0;
  std::size_t size = 12;
};

struct ToolScene {
  std::vector<Glyph> glyphs;
  std::uint64_t texture_seed = 0;
};

std::vector<ToolScene> tool_scenes(std::size_t count, std::uint64_t seed);
/// 3x64x64 image plus a 7-way presence target.
Example render_tool_scene(const ToolScene& scene);
/// Multilabel dataset of 0-3 glyphs from 7 classes per image.
Dataset synth_tools(std::size_t count, std::uint64_t seed);

inline constexpr std::size_t kSegClasses = 3;
inline constexpr std::size_t kSegImageSize = 32;

struct SegShape {
  std::size_t cls = 1;  // 1 rectangle, 2 disc
  long row = 0;         // rectangle top-left or disc centre
  long col = 0;
  long height = 8;      // rectangle extents; disc uses height as radius
  long width = 8;
};

struct SegScene {
  std::vector<SegShape> shapes;
  std::uint64_t noise_seed = 0;
};

std::vector<SegScene> seg_scenes(std::size_t count, std::uint64_t seed);
/// 1x32x32 image plus one-hot [3,32,32] label map; later shapes occlude
/// earlier ones.
Example render_seg_scene(const SegScene& scene);
Dataset synth_segmentation(std::size_t count, std::uint64_t seed);

/// Binary sequences of length T; input [T,1] in {0,1}, target [T,1] is the
/// running parity. With count == 0 every one of the 2^T sequences is used.
Dataset synth_parity(std::size_t length, std::size_t count, std::uint64_t seed);

inline constexpr std::size_t kShapeClasses = 3;
inline constexpr std::size_t kShapeImageSize = 8;

/// 1x8x8 binary images of a filled square, a cross or a bar (3-5 px) at a
/// random position; one-hot class target.
Dataset synth_shapes(std::size_t count, std::uint64_t seed);

}  // namespace tinydl
