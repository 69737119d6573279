#pragma once

// VLW1 weight file, little-endian:
//   "VLW1"
//   u32 d_p, d_o, k, c, n_phonemes, n_speakers, hidden_divisor, update_mode
//   f64 tensors in order lut_p, lut_s, f_u, f_o, then attention, update and
//   output networks as {w1, b1, w2, b2}; matrices row-major.
//
// VLO1 checkpoint: "VLO1" | u32 optimizer | u64 step | u32 slot count |
// embedded VLW1 image | each optimizer slot as a full tensor set (f64, same
// order, no header).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "voiceloop/model.hpp"

namespace voiceloop {

void write_weights(const ModelParams& params, std::ostream& os);
void save_weights(const ModelParams& params, const std::filesystem::path& path);
ModelParams read_weights(std::istream& is);
ModelParams load_weights(const std::filesystem::path& path);

struct OptimizerSnapshot {
  std::uint32_t kind = 0;
  std::uint64_t step = 0;
  std::vector<ModelParams> slots;  // e.g. Adam first and second moments
};

void save_checkpoint(const ModelParams& params, const OptimizerSnapshot& optimizer,
                     const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path, OptimizerSnapshot* optimizer);

}  // namespace voiceloop
