#include "voiceloop/features.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "voiceloop/errors.hpp"

namespace voiceloop {
namespace {

constexpr char kMagic[5] = "VLF1";

void write_container(const Matrix<double>& m, double frame_shift_ms,
                     const std::filesystem::path& path) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidInput("cannot write an empty feature matrix");
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max())
    throw InvalidInput("feature matrix too large for the VLF1 header");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  binary::put_magic(out, kMagic);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  binary::put<float>(out, static_cast<float>(frame_shift_ms));
  for (double v : m.flat()) binary::put<float>(out, static_cast<float>(v));
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace

FeatureSequence read_features(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  binary::expect_magic(in, kMagic);
  const auto frames = binary::get<std::uint32_t>(in, "frame count");
  const auto dim = binary::get<std::uint32_t>(in, "feature dimension");
  const auto shift = binary::get<float>(in, "frame shift");
  if (frames == 0) throw FormatError(path.string() + ": zero frames");
  if (dim == 0) throw FormatError(path.string() + ": zero feature dimension");
  if (expected_dim != 0 && dim != expected_dim)
    throw FormatError(path.string() + ": feature dimension " + std::to_string(dim) +
                      ", expected " + std::to_string(expected_dim));
  FeatureSequence seq;
  seq.frame_shift_ms = shift;
  seq.frames = Matrix<double>(frames, dim);
  for (double& v : seq.frames.flat()) v = binary::get<float>(in, "feature values");
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError(path.string() + ": trailing bytes after feature data");
  return seq;
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  write_container(seq.frames, seq.frame_shift_ms, path);
}

void write_matrix(const Matrix<double>& m, const std::filesystem::path& path, double frame_shift_ms) {
  write_container(m, frame_shift_ms, path);
}

}  // namespace voiceloop
