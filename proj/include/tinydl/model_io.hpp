#pragma once

#include <iosfwd>
#include <string>

#include "tinydl/architecture.hpp"
#include "tinydl/data.hpp"
#include "tinydl/recurrent.hpp"

namespace tinydl {

inline constexpr int kModelFormatVersion = 1;

/// Model file: the line "SGM1", one line of JSON (format version, name,
/// task, input shape, layer specs with freeze flags, tensor count), then the
/// parameter tensors as SGT1 blocks in layer order.
void write_model(std::ostream& out, const Network& net, Task task);
void save_model(const std::string& path, const Network& net, Task task);

struct LoadedModel {
  Network net;
  Task task;
};

LoadedModel read_model(std::istream& in);
LoadedModel load_model(const std::string& path);

Architecture architecture_of(const Network& net);

/// Copies every parameter tensor from a model file into `net`. The layer
/// parameter shapes must agree one for one; otherwise LoadError(shape) lists
/// every mismatch. Freeze flags of `net` are kept.
void load_pretrained(Network& net, const std::string& path);

/// Recurrent cell file: the line "SGR1", one line of JSON (extents, hidden
/// activation), then w_xh, w_hh, b_h, w_hy, b_y as SGT1 blocks.
void save_rnn_cell(const std::string& path, const RnnCell& cell);
RnnCell load_rnn_cell(const std::string& path);

}  // namespace tinydl
