// Procedural toy datasets. Every generator is a pure function of its
// (count, seed) arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "tinydl/data.hpp"
#include "tinydl/errors.hpp"

namespace tinydl {

Dataset synth_blobs(std::size_t count, std::uint64_t seed, double separation) {
  if (count == 0) throw ConfigError("synth_blobs: count must be positive");
  Rng rng(Rng::derive(seed, "blobs"));
  Dataset ds;
  ds.task = Task::binary;
  ds.note = "synthetic 2-blob gaussian";
  ds.examples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double label = static_cast<double>(i % 2);
    const double centre = label > 0.5 ? separation : -separation;
    Tensor x({2});
    x[0] = rng.normal(centre, 1.0);
    x[1] = rng.normal(centre, 1.0);
    ds.examples.push_back({std::move(x), Tensor({1}, label)});
  }
  return ds;
}

Tensor sample_mixture2d(std::size_t count, Rng& rng, const Mixture2d& mix) {
  Tensor out({count, 2});
  for (std::size_t i = 0; i < count; ++i) {
    const double* m = rng.bernoulli(0.5) ? mix.mean_a : mix.mean_b;
    out.at(i, 0) = rng.normal(m[0], mix.stddev);
    out.at(i, 1) = rng.normal(m[1], mix.stddev);
  }
  return out;
}

// --- tools -----------------------------------------------------------------------

namespace {

struct Rgb {
  double r, g, b;
};

constexpr std::array<Rgb, kToolClasses> kGlyphColours{{
    {1.0, 0.15, 0.15},  // square
    {0.15, 1.0, 0.15},  // disc
    {0.15, 0.15, 1.0},  // triangle
    {1.0, 1.0, 0.15},   // horizontal bar
    {1.0, 0.15, 1.0},   // vertical bar
    {0.15, 1.0, 1.0},   // ring
    {1.0, 1.0, 1.0},    // plus
}};

bool glyph_covers(std::size_t cls, long i, long j, long size) {
  const double c = (size - 1) / 2.0;
  const double di = i - c, dj = j - c;
  const double r = size / 2.0;
  const long third = size / 3;
  switch (cls) {
    case 0: return true;
    case 1: return di * di + dj * dj <= r * r;
    case 2: return std::abs(dj) <= (i + 1) / 2.0;
    case 3: return i >= third && i < size - third;
    case 4: return j >= third && j < size - third;
    case 5: {
      const double d2 = di * di + dj * dj;
      return d2 <= r * r && d2 > (0.55 * r) * (0.55 * r);
    }
    case 6: return (i >= third && i < size - third) || (j >= third && j < size - third);
  }
  return false;
}

}  // namespace

std::vector<ToolScene> tool_scenes(std::size_t count, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "tools"));
  std::vector<ToolScene> scenes(count);
  constexpr std::size_t quadrant = kToolImageSize / 2;
  for (auto& scene : scenes) {
    scene.texture_seed = rng.next_u64();
    const std::size_t k = rng.below(4);
    std::array<std::size_t, kToolClasses> classes{};
    std::iota(classes.begin(), classes.end(), 0);
    rng.shuffle(std::span<std::size_t>(classes));
    std::array<std::size_t, 4> quads{0, 1, 2, 3};
    rng.shuffle(std::span<std::size_t>(quads));
    for (std::size_t g = 0; g < k; ++g) {
      Glyph glyph;
      glyph.cls = classes[g];
      glyph.size = 12 + rng.below(9);
      const std::size_t slack = quadrant - glyph.size + 1;
      glyph.row = (quads[g] / 2) * quadrant + rng.below(slack);
      glyph.col = (quads[g] % 2) * quadrant + rng.below(slack);
      scene.glyphs.push_back(glyph);
    }
  }
  return scenes;
}

Example render_tool_scene(const ToolScene& scene) {
  constexpr std::size_t n = kToolImageSize;
  Tensor image({3, n, n});
  Tensor target({kToolClasses});
  Rng rng(scene.texture_seed);
  const double fi = rng.uniform(0.1, 0.5), fj = rng.uniform(0.1, 0.5);
  for (std::size_t c = 0; c < 3; ++c) {
    const double phase = rng.uniform(0.0, 6.283);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        image.at(c, i, j) = 0.12 + 0.06 * std::sin(fi * i + fj * j + phase) + rng.uniform(0.0, 0.12);
      }
  }
  for (const auto& g : scene.glyphs) {
    if (g.cls >= kToolClasses) throw ConfigError("glyph class out of range");
    target[g.cls] = 1.0;
    const Rgb colour = kGlyphColours[g.cls];
    const double brightness = rng.uniform(0.8, 1.0);
    const long size = static_cast<long>(g.size);
    for (long i = 0; i < size; ++i)
      for (long j = 0; j < size; ++j) {
        if (!glyph_covers(g.cls, i, j, size)) continue;
        const std::size_t r = g.row + static_cast<std::size_t>(i), c = g.col + static_cast<std::size_t>(j);
        if (r >= n || c >= n) continue;
        image.at(0, r, c) = brightness * colour.r;
        image.at(1, r, c) = brightness * colour.g;
        image.at(2, r, c) = brightness * colour.b;
      }
  }
  return {std::move(image), std::move(target)};
}

Dataset synth_tools(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("synth_tools: count must be positive");
  Dataset ds;
  ds.task = Task::multilabel;
  ds.note = "synthetic tool-presence glyphs (7 classes)";
  ds.examples.reserve(count);
  for (const auto& scene : tool_scenes(count, seed)) ds.examples.push_back(render_tool_scene(scene));
  return ds;
}

// --- segmentation --------------------------------------------------------------

std::vector<SegScene> seg_scenes(std::size_t count, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "segmentation"));
  std::vector<SegScene> scenes(count);
  constexpr long n = kSegImageSize;
  for (auto& scene : scenes) {
    scene.noise_seed = rng.next_u64();
    const std::size_t k = rng.below(4);
    for (std::size_t s = 0; s < k; ++s) {
      SegShape shape;
      shape.cls = 1 + rng.below(2);
      if (shape.cls == 1) {
        shape.height = 6 + static_cast<long>(rng.below(9));
        shape.width = 6 + static_cast<long>(rng.below(9));
        shape.row = static_cast<long>(rng.below(static_cast<std::uint64_t>(n - shape.height + 1)));
        shape.col = static_cast<long>(rng.below(static_cast<std::uint64_t>(n - shape.width + 1)));
      } else {
        shape.height = shape.width = 3 + static_cast<long>(rng.below(5));
        const long r = shape.height;
        shape.row = r + static_cast<long>(rng.below(static_cast<std::uint64_t>(n - 2 * r)));
        shape.col = r + static_cast<long>(rng.below(static_cast<std::uint64_t>(n - 2 * r)));
      }
      scene.shapes.push_back(shape);
    }
  }
  return scenes;
}

Example render_seg_scene(const SegScene& scene) {
  constexpr long n = kSegImageSize;
  std::vector<std::size_t> labels(n * n, 0);
  for (const auto& s : scene.shapes) {
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        bool inside;
        if (s.cls == 1) {
          inside = i >= s.row && i < s.row + s.height && j >= s.col && j < s.col + s.width;
        } else {
          const long di = i - s.row, dj = j - s.col;
          inside = di * di + dj * dj <= s.height * s.height;
        }
        if (inside) labels[static_cast<std::size_t>(i * n + j)] = s.cls;
      }
  }
  Rng rng(scene.noise_seed);
  Tensor image({1, static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  Tensor target({kSegClasses, static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  constexpr double kLevel[kSegClasses] = {0.0, 0.5, 1.0};
  for (std::size_t p = 0; p < labels.size(); ++p) {
    image[p] = kLevel[labels[p]] + rng.normal(0.0, 0.08);
    target[labels[p] * static_cast<std::size_t>(n * n) + p] = 1.0;
  }
  return {std::move(image), std::move(target)};
}

Dataset synth_segmentation(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("synth_segmentation: count must be positive");
  Dataset ds;
  ds.task = Task::per_pixel;
  ds.note = "synthetic segmentation (background, rectangle, disc)";
  ds.examples.reserve(count);
  for (const auto& scene : seg_scenes(count, seed)) ds.examples.push_back(render_seg_scene(scene));
  return ds;
}

// --- parity --------------------------------------------------------------------

Dataset synth_parity(std::size_t length, std::size_t count, std::uint64_t seed) {
  if (length == 0) throw ConfigError("synth_parity: length must be positive");
  Dataset ds;
  ds.task = Task::sequence;
  ds.note = "running parity of binary sequences";
  const auto emit = [&](const std::vector<double>& bits) {
    Tensor x({length, 1}), y({length, 1});
    double parity = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      x[t] = bits[t];
      parity = parity != bits[t] ? 1.0 : 0.0;
      y[t] = parity;
    }
    ds.examples.push_back({std::move(x), std::move(y)});
  };
  std::vector<double> bits(length);
  if (count == 0) {
    if (length > 20) throw ConfigError("synth_parity: exhaustive enumeration limited to length 20");
    for (std::size_t code = 0; code < (std::size_t{1} << length); ++code) {
      for (std::size_t t = 0; t < length; ++t) bits[t] = static_cast<double>((code >> t) & 1U);
      emit(bits);
    }
  } else {
    Rng rng(Rng::derive(seed, "parity"));
    for (std::size_t i = 0; i < count; ++i) {
      for (auto& b : bits) b = static_cast<double>(rng.below(2));
      emit(bits);
    }
  }
  return ds;
}

// --- 8x8 shapes ----------------------------------------------------------------

Dataset synth_shapes(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("synth_shapes: count must be positive");
  constexpr long n = static_cast<long>(kShapeImageSize);
  Rng rng(Rng::derive(seed, "shapes"));
  Dataset ds;
  ds.task = Task::multiclass;
  ds.note = "8x8 squares, crosses and bars";
  for (std::size_t i = 0; i < count; ++i) {
    Tensor x({1, kShapeImageSize, kShapeImageSize});
    const std::size_t cls = rng.below(kShapeClasses);
    const long size = 3 + static_cast<long>(rng.below(3));  // 3..5
    const long r0 = static_cast<long>(rng.below(static_cast<std::uint64_t>(n - size + 1)));
    const long c0 = static_cast<long>(rng.below(static_cast<std::uint64_t>(n - size + 1)));
    for (long r = 0; r < size; ++r) {
      for (long c = 0; c < size; ++c) {
        const bool on = cls == 0 || (cls == 1 && (r == size / 2 || c == size / 2)) || (cls == 2 && r == size / 2);
        if (on) x.at(0, static_cast<std::size_t>(r0 + r), static_cast<std::size_t>(c0 + c)) = 1.0;
      }
    }
    Tensor y({kShapeClasses});
    y[cls] = 1.0;
    ds.examples.push_back({std::move(x), std::move(y)});
  }
  return ds;
}

}  // namespace tinydl
