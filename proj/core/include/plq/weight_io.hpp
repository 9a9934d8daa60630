#pragma once

#include <string>

#include "plq/model.hpp"

namespace plq {

// PLQM weight file: magic "PLQM", version u32 LE, header_len u32 LE, a JSON
// header describing the layer stack, then row-major little-endian 64-bit
// floats for every weighted layer in order (kernel, then bias). Round trips
// are bit-exact.

inline constexpr std::uint32_t kWeightFileVersion = 1;

void save_model(const EmbeddingModel& model, const std::string& path);

EmbeddingModel load_model(const std::string& path);

} // namespace plq
