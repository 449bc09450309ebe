#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tinydl/network.hpp"

namespace tinydl {

/// Layer list plus input shape: everything needed to build a network.
struct Architecture {
  std::string name = "net";
  Shape input_shape;
  std::vector<LayerSpec> layers;
};

nlohmann::json to_json(const LayerSpec& spec);
/// Accepts {"type": "conv2d", "filters": 8, "kernel": 3, ...}; throws
/// ConfigError with the offending key.
LayerSpec layer_spec_from_json(const nlohmann::json& j);
std::string layer_type_name(const LayerSpec& spec);

/// Shapes after each layer; throws DimensionError naming the layer index.
std::vector<Shape> infer_shapes(const Architecture& arch);
/// Parameter count from the layer list alone (no allocation).
std::size_t param_count(const Architecture& arch);

/// Fresh network; parameters drawn from the "init" stream of `seed`.
Network build_network(const Architecture& arch, std::uint64_t seed);

// Presets. Each returns a plain layer list that can be edited before building.

/// Dense hidden layers with ReLU, then a head of `outputs` units with the
/// given activation (sigmoid for binary / multilabel, softmax otherwise).
Architecture mlp_preset(std::size_t inputs, const std::vector<std::size_t>& hidden,
                        std::size_t outputs, LayerKind head = LayerKind::activation);

/// 3x64x64 input, three conv(3x3, pad 1)+ReLU+maxpool(2) blocks with 8, 16
/// and 32 channels, then dense 128 / 64 / 7 with a sigmoid head.
Architecture alexnet_mini_preset();

/// Stem conv pair at `base` channels, then `blocks` stages of
/// maxpool(2) + two convs that double the channel count; softmax head.
Architecture vgg_mini_preset(std::size_t channels = 3, std::size_t size = 32, std::size_t base = 8,
                             std::size_t blocks = 2, std::size_t classes = 10);

/// 1x32x32 encoder (two conv+pool stages) and a nearest-upsample decoder
/// ending in a per-pixel softmax over 3 classes.
Architecture segmenter_mini_preset();

Architecture preset(const std::string& name);

}  // namespace tinydl
