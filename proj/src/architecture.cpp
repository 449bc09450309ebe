#include "tinydl/architecture.hpp"

#include <cmath>

#include "tinydl/errors.hpp"

namespace tinydl {

using nlohmann::json;

std::string layer_type_name(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::sepconv2d: return "sepconv2d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::softmax: return "softmax";
    case LayerKind::dropout: return "dropout";
    case LayerKind::upsample: return "upsample";
    case LayerKind::flatten: return "flatten";
    case LayerKind::activation:
      switch (spec.activation) {
        case Activation::step: return "step";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::linear: return "linear";
      }
  }
  return "?";
}

json to_json(const LayerSpec& s) {
  json j;
  j["type"] = layer_type_name(s);
  switch (s.kind) {
    case LayerKind::dense: j["units"] = s.units; break;
    case LayerKind::conv2d:
    case LayerKind::sepconv2d:
      j["filters"] = s.units;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      j["size"] = s.size;
      j["stride"] = s.stride;
      break;
    case LayerKind::dropout: j["rate"] = s.rate; break;
    case LayerKind::upsample: j["factor"] = s.size; break;
    case LayerKind::activation:
      if (s.activation == Activation::step) j["threshold"] = s.threshold;
      break;
    default: break;
  }
  return j;
}

namespace {

std::size_t positive(const json& j, const char* key, std::size_t fallback, bool required) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(std::string("layer '") + j.value("type", "?") + "': missing '" + key + "'");
    return fallback;
  }
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string("layer field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

LayerSpec layer_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw ConfigError("layer entry needs a string 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  LayerSpec s;
  if (type == "dense") {
    s.kind = LayerKind::dense;
    s.units = positive(j, "units", 0, true);
  } else if (type == "conv2d" || type == "sepconv2d") {
    s.kind = type == "conv2d" ? LayerKind::conv2d : LayerKind::sepconv2d;
    s.units = positive(j, "filters", 0, true);
    s.kernel = positive(j, "kernel", 3, false);
    s.stride = positive(j, "stride", 1, false);
    s.padding = positive(j, "padding", 0, false);
  } else if (type == "maxpool" || type == "avgpool") {
    s.kind = type == "maxpool" ? LayerKind::maxpool : LayerKind::avgpool;
    s.size = positive(j, "size", 2, false);
    s.stride = positive(j, "stride", s.size, false);
  } else if (type == "dropout") {
    s.kind = LayerKind::dropout;
    s.rate = j.value("rate", 0.5);
    if (!(s.rate >= 0.0 && s.rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  } else if (type == "upsample") {
    s.kind = LayerKind::upsample;
    s.size = positive(j, "factor", 2, false);
  } else if (type == "flatten") {
    s.kind = LayerKind::flatten;
  } else if (type == "softmax") {
    s.kind = LayerKind::softmax;
  } else if (type == "relu" || type == "sigmoid" || type == "tanh" || type == "linear" || type == "step") {
    s.kind = LayerKind::activation;
    s.activation = type == "relu"      ? Activation::relu
                   : type == "sigmoid" ? Activation::sigmoid
                   : type == "tanh"    ? Activation::tanh
                   : type == "linear"  ? Activation::linear
                                       : Activation::step;
    s.threshold = j.value("threshold", 0.0);
    if (!std::isfinite(s.threshold)) throw ConfigError("step threshold must be finite");
  } else {
    throw ConfigError("unknown layer type '" + type + "'");
  }
  if ((s.kind == LayerKind::conv2d || s.kind == LayerKind::sepconv2d) && (s.units == 0 || s.kernel == 0 || s.stride == 0)) {
    throw ConfigError("layer '" + type + "': filters, kernel and stride must be positive");
  }
  if ((s.kind == LayerKind::maxpool || s.kind == LayerKind::avgpool || s.kind == LayerKind::upsample) &&
      (s.size == 0 || s.stride == 0)) {
    throw ConfigError("layer '" + type + "': size and stride must be positive");
  }
  if (s.kind == LayerKind::dense && s.units == 0) throw ConfigError("dense: units must be positive");
  return s;
}

namespace {

Shape spec_output_shape(const LayerSpec& s, const Shape& in) {
  const auto need_rank = [&](std::size_t r) {
    if (in.size() != r) {
      throw DimensionError(layer_type_name(s) + " expects a rank-" + std::to_string(r) + " input, got " +
                           to_string(in));
    }
  };
  switch (s.kind) {
    case LayerKind::dense: need_rank(1); return {s.units};
    case LayerKind::conv2d:
    case LayerKind::sepconv2d:
      need_rank(3);
      return {s.units, conv_output_extent(in[1], s.kernel, s.stride, s.padding),
              conv_output_extent(in[2], s.kernel, s.stride, s.padding)};
    case LayerKind::maxpool:
    case LayerKind::avgpool:
      need_rank(3);
      return {in[0], conv_output_extent(in[1], s.size, s.stride, 0),
              conv_output_extent(in[2], s.size, s.stride, 0)};
    case LayerKind::upsample: need_rank(3); return {in[0], in[1] * s.size, in[2] * s.size};
    case LayerKind::flatten: return {shape_size(in)};
    case LayerKind::softmax:
      if (in.size() != 1 && in.size() != 3) throw DimensionError("softmax expects rank-1 or [C,H,W] input");
      return in;
    case LayerKind::activation:
    case LayerKind::dropout: return in;
  }
  return in;
}

}  // namespace

std::vector<Shape> infer_shapes(const Architecture& arch) {
  if (arch.layers.empty()) throw ConfigError("architecture '" + arch.name + "' has no layers");
  std::vector<Shape> shapes;
  Shape current = arch.input_shape;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    try {
      current = spec_output_shape(arch.layers[i], current);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " (" + layer_type_name(arch.layers[i]) +
                           ") on input " + to_string(current) + ": " + e.what());
    }
    shapes.push_back(current);
  }
  return shapes;
}

std::size_t param_count(const Architecture& arch) {
  std::size_t total = 0;
  Shape current = arch.input_shape;
  const auto shapes = infer_shapes(arch);
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& s = arch.layers[i];
    const std::size_t k2 = s.kernel * s.kernel;
    switch (s.kind) {
      case LayerKind::dense: total += s.units * current[0] + s.units; break;
      case LayerKind::conv2d: total += s.units * current[0] * k2 + s.units; break;
      case LayerKind::sepconv2d: total += current[0] * k2 + current[0] + s.units * current[0] + s.units; break;
      default: break;
    }
    current = shapes[i];
  }
  return total;
}

Network build_network(const Architecture& arch, std::uint64_t seed) {
  if (arch.layers.empty()) throw ConfigError("architecture '" + arch.name + "' has no layers");
  Network net(arch.name, arch.input_shape);
  Rng rng(Rng::derive(seed, "init"));
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const Shape& in = net.output_shape();
    std::unique_ptr<Layer> layer;
    try {
      layer = make_layer(arch.layers[i], in, rng);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " (" + layer_type_name(arch.layers[i]) +
                           ") on input " + to_string(in) + ": " + e.what());
    }
    net.add(std::move(layer));
  }
  return net;
}

namespace {

LayerSpec dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}

LayerSpec act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

LayerSpec conv(std::size_t filters, std::size_t kernel = 3, std::size_t padding = 1) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.units = filters;
  s.kernel = kernel;
  s.stride = 1;
  s.padding = padding;
  return s;
}

LayerSpec maxpool() {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.size = 2;
  s.stride = 2;
  return s;
}

LayerSpec upsample(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  s.size = factor;
  return s;
}

LayerSpec simple(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

}  // namespace

Architecture mlp_preset(std::size_t inputs, const std::vector<std::size_t>& hidden,
                        std::size_t outputs, LayerKind head) {
  Architecture a;
  a.name = "mlp";
  a.input_shape = {inputs};
  for (auto h : hidden) {
    a.layers.push_back(dense(h));
    a.layers.push_back(act(Activation::relu));
  }
  a.layers.push_back(dense(outputs));
  a.layers.push_back(head == LayerKind::softmax ? simple(LayerKind::softmax) : act(Activation::sigmoid));
  return a;
}

Architecture alexnet_mini_preset() {
  Architecture a;
  a.name = "alexnet-mini";
  a.input_shape = {3, 64, 64};
  for (std::size_t ch : {8, 16, 32}) {
    a.layers.push_back(conv(ch));
    a.layers.push_back(act(Activation::relu));
    a.layers.push_back(maxpool());
  }
  a.layers.push_back(simple(LayerKind::flatten));
  a.layers.push_back(dense(128));
  a.layers.push_back(act(Activation::relu));
  a.layers.push_back(dense(64));
  a.layers.push_back(act(Activation::relu));
  a.layers.push_back(dense(7));
  a.layers.push_back(act(Activation::sigmoid));
  return a;
}

Architecture vgg_mini_preset(std::size_t channels, std::size_t size, std::size_t base,
                             std::size_t blocks, std::size_t classes) {
  Architecture a;
  a.name = "vgg-mini";
  a.input_shape = {channels, size, size};
  std::size_t ch = base;
  for (int k = 0; k < 2; ++k) {
    a.layers.push_back(conv(ch));
    a.layers.push_back(act(Activation::relu));
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    ch *= 2;
    a.layers.push_back(maxpool());
    for (int k = 0; k < 2; ++k) {
      a.layers.push_back(conv(ch));
      a.layers.push_back(act(Activation::relu));
    }
  }
  a.layers.push_back(simple(LayerKind::flatten));
  a.layers.push_back(dense(classes));
  a.layers.push_back(simple(LayerKind::softmax));
  return a;
}

Architecture segmenter_mini_preset() {
  Architecture a;
  a.name = "segmenter-mini";
  a.input_shape = {1, 32, 32};
  a.layers = {conv(8),     act(Activation::relu), maxpool(), conv(16), act(Activation::relu), maxpool(),
              upsample(2), conv(8),               act(Activation::relu), upsample(2), conv(3),
              simple(LayerKind::softmax)};
  return a;
}

Architecture preset(const std::string& name) {
  if (name == "alexnet-mini") return alexnet_mini_preset();
  if (name == "vgg-mini") return vgg_mini_preset();
  if (name == "segmenter-mini") return segmenter_mini_preset();
  if (name == "mlp") return mlp_preset(2, {16, 16}, 1);
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace tinydl
