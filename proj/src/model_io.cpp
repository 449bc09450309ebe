#include "tinydl/model_io.hpp"

#include <fstream>
#include <sstream>

#include "tinydl/errors.hpp"

namespace tinydl {

namespace {

constexpr const char* kMagic = "SGM1";

nlohmann::json header_of(const Network& net, Task task) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    nlohmann::json l = to_json(net.layer(i).spec());
    l["frozen"] = net.frozen(i);
    layers.push_back(l);
  }
  return {{"format", "tinydl-model"},
          {"version", kModelFormatVersion},
          {"name", net.name()},
          {"task", to_string(task)},
          {"input_shape", net.input_shape()},
          {"layers", layers},
          {"param_tensors", net.parameters().size()}};
}

}  // namespace

Architecture architecture_of(const Network& net) {
  Architecture a;
  a.name = net.name();
  a.input_shape = net.input_shape();
  a.layers = net.specs();
  return a;
}

void write_model(std::ostream& out, const Network& net, Task task) {
  out << kMagic << '\n' << header_of(net, task).dump() << '\n';
  for (const Tensor* p : net.parameters()) write_sgt1(out, *p);
  if (!out) throw LoadError(LoadError::Kind::io, "failed writing model");
}

void save_model(const std::string& path, const Network& net, Task task) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
  write_model(out, net, task);
}

LoadedModel read_model(std::istream& in) {
  std::string magic, header_line;
  if (!std::getline(in, magic)) throw LoadError(LoadError::Kind::truncated, "model file is empty");
  if (magic != kMagic) throw LoadError(LoadError::Kind::magic, "not a model file (bad magic)");
  if (!std::getline(in, header_line)) throw LoadError(LoadError::Kind::truncated, "model header missing");

  Architecture arch;
  Task task = Task::binary;
  std::vector<bool> frozen;
  std::size_t tensors = 0;
  try {
    const auto h = nlohmann::json::parse(header_line);
    if (h.at("version").get<int>() != kModelFormatVersion) {
      throw LoadError(LoadError::Kind::manifest, "unsupported model version " + h.at("version").dump());
    }
    arch.name = h.at("name").get<std::string>();
    arch.input_shape = h.at("input_shape").get<Shape>();
    task = task_from_string(h.at("task").get<std::string>());
    for (const auto& l : h.at("layers")) {
      arch.layers.push_back(layer_spec_from_json(l));
      frozen.push_back(l.value("frozen", false));
    }
    tensors = h.at("param_tensors").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::manifest, std::string("bad model header: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(LoadError::Kind::manifest, std::string("bad model header: ") + e.what());
  }

  // Parameters are overwritten below, so the init seed does not matter.
  Network net = build_network(arch, 0);
  auto params = net.parameters();
  if (params.size() != tensors) {
    throw LoadError(LoadError::Kind::manifest, "header lists " + std::to_string(tensors) +
                                                   " tensors but the architecture has " +
                                                   std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = read_sgt1(in);
    if (t.shape() != params[i]->shape()) {
      throw LoadError(LoadError::Kind::shape, "parameter tensor " + std::to_string(i) + " has shape " +
                                                  to_string(t.shape()) + ", expected " +
                                                  to_string(params[i]->shape()));
    }
    *params[i] = std::move(t);
  }
  for (std::size_t i = 0; i < frozen.size(); ++i) net.set_frozen(i, frozen[i]);
  return {std::move(net), task};
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open " + path);
  return read_model(in);
}

void load_pretrained(Network& net, const std::string& path) {
  LoadedModel src = load_model(path);
  auto dst = net.parameters();
  const auto from = src.net.parameters();
  std::ostringstream problems;
  std::size_t count = 0;
  if (dst.size() != from.size()) {
    problems << "\n  tensor count " << from.size() << " vs " << dst.size();
    ++count;
  }
  for (std::size_t i = 0; i < std::min(dst.size(), from.size()); ++i) {
    if (dst[i]->shape() != from[i]->shape()) {
      problems << "\n  tensor " << i << ": file " << to_string(from[i]->shape()) << ", network "
               << to_string(dst[i]->shape());
      ++count;
    }
  }
  if (count) throw LoadError(LoadError::Kind::shape, path + ": " + std::to_string(count) + " mismatch(es)" + problems.str());
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = *from[i];
}

void save_rnn_cell(const std::string& path, const RnnCell& cell) {
  cell.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
  const nlohmann::json h{{"format", "tinydl-rnn"},
                         {"version", kModelFormatVersion},
                         {"inputs", cell.inputs()},
                         {"hidden", cell.hidden_size()},
                         {"outputs", cell.outputs()},
                         {"activation", cell.hidden == Activation::tanh ? "tanh" : "linear"}};
  out << "SGR1\n" << h.dump() << '\n';
  for (const Tensor* p : cell.parameters()) write_sgt1(out, *p);
  if (!out) throw LoadError(LoadError::Kind::io, "failed writing " + path);
}

RnnCell load_rnn_cell(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open " + path);
  std::string magic, line;
  if (!std::getline(in, magic) || magic != "SGR1") throw LoadError(LoadError::Kind::magic, path + ": not a cell file");
  if (!std::getline(in, line)) throw LoadError(LoadError::Kind::truncated, path + ": header missing");
  RnnCell cell;
  try {
    const auto h = nlohmann::json::parse(line);
    cell = zero_rnn_cell(h.at("inputs").get<std::size_t>(), h.at("hidden").get<std::size_t>(),
                         h.at("outputs").get<std::size_t>());
    cell.hidden = h.at("activation").get<std::string>() == "linear" ? Activation::linear : Activation::tanh;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::manifest, path + ": bad header: " + e.what());
  }
  for (Tensor* p : cell.parameters()) {
    Tensor t = read_sgt1(in);
    if (t.shape() != p->shape()) throw LoadError(LoadError::Kind::shape, path + ": tensor shape " + to_string(t.shape()) + ", expected " + to_string(p->shape()));
    *p = std::move(t);
  }
  return cell;
}

}  // namespace tinydl
