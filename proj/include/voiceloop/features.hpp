#pragma once

#include <filesystem>

#include "voiceloop/tensor.hpp"

namespace voiceloop {

// T x d_o vocoder feature frames, one row per frame.
struct FeatureSequence {
  Matrix<double> frames;
  double frame_shift_ms = 5.0;

  std::size_t length() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

// VLF1 container, little-endian:
//   "VLF1" | u32 T | u32 dim | f32 frame_shift_ms | T*dim f32, row-major
// Values are stored as f32, so write(read(f)) reproduces f byte for byte.
// Throws FormatError on bad magic, truncation, T == 0, dim == 0 or, when
// expected_dim is nonzero, a dimension mismatch.
FeatureSequence read_features(const std::filesystem::path& path, std::size_t expected_dim = 0);
void write_features(const FeatureSequence& seq, const std::filesystem::path& path);

// Same container for any dense matrix (attention traces).
void write_matrix(const Matrix<double>& m, const std::filesystem::path& path,
                  double frame_shift_ms = 5.0);

}  // namespace voiceloop
