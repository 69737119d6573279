#include "voiceloop/weights_io.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "voiceloop/errors.hpp"

namespace voiceloop {
namespace {

constexpr char kWeightsMagic[5] = "VLW1";
constexpr char kCheckpointMagic[5] = "VLO1";

void write_tensors(const ModelParams& params, std::ostream& os) {
  params.for_each_tensor([&](const std::string&, std::span<const double> t) {
    for (double v : t) binary::put<double>(os, v);
  });
}

void read_tensors(ModelParams& params, std::istream& is) {
  params.for_each_tensor([&](const std::string& name, std::span<double> t) {
    for (double& v : t) v = binary::get<double>(is, name.c_str());
  });
}

std::uint32_t narrow(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("dimension exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_weights(const ModelParams& params, std::ostream& os) {
  const HyperParams& h = params.hyper;
  binary::put_magic(os, kWeightsMagic);
  for (std::size_t v : {h.d_p, h.d_o, h.k, h.c, h.n_phonemes, h.n_speakers, h.hidden_divisor})
    binary::put<std::uint32_t>(os, narrow(v));
  binary::put<std::uint32_t>(os, static_cast<std::uint32_t>(h.update));
  write_tensors(params, os);
}

void save_weights(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_weights(params, out);
  if (!out) throw FormatError("write failed: " + path.string());
}

ModelParams read_weights(std::istream& is) {
  binary::expect_magic(is, kWeightsMagic);
  HyperParams h;
  h.d_p = binary::get<std::uint32_t>(is, "d_p");
  h.d_o = binary::get<std::uint32_t>(is, "d_o");
  h.k = binary::get<std::uint32_t>(is, "k");
  h.c = binary::get<std::uint32_t>(is, "c");
  h.n_phonemes = binary::get<std::uint32_t>(is, "n_phonemes");
  h.n_speakers = binary::get<std::uint32_t>(is, "n_speakers");
  h.hidden_divisor = binary::get<std::uint32_t>(is, "hidden_divisor");
  const auto mode = binary::get<std::uint32_t>(is, "update mode");
  if (mode > 1) throw FormatError("unknown buffer update mode " + std::to_string(mode));
  h.update = static_cast<BufferUpdate>(mode);
  try {
    h.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("weight header: ") + e.what());
  }
  ModelParams params(h);
  read_tensors(params, is);
  return params;
}

ModelParams load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  ModelParams params = read_weights(in);
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError(path.string() + ": trailing bytes after weights");
  return params;
}

void save_checkpoint(const ModelParams& params, const OptimizerSnapshot& optimizer,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  binary::put_magic(out, kCheckpointMagic);
  binary::put<std::uint32_t>(out, optimizer.kind);
  binary::put<std::uint64_t>(out, optimizer.step);
  binary::put<std::uint32_t>(out, narrow(optimizer.slots.size()));
  write_weights(params, out);
  for (const auto& slot : optimizer.slots) {
    if (!(slot.hyper == params.hyper)) throw InvalidInput("optimizer slot shape mismatch");
    write_tensors(slot, out);
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, OptimizerSnapshot* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  binary::expect_magic(in, kCheckpointMagic);
  OptimizerSnapshot snap;
  snap.kind = binary::get<std::uint32_t>(in, "optimizer kind");
  snap.step = binary::get<std::uint64_t>(in, "optimizer step");
  const auto slots = binary::get<std::uint32_t>(in, "slot count");
  if (slots > 8) throw FormatError("implausible optimizer slot count");
  ModelParams params = read_weights(in);
  for (std::uint32_t i = 0; i < slots; ++i) {
    ModelParams slot(params.hyper);
    read_tensors(slot, in);
    snap.slots.push_back(std::move(slot));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw FormatError(path.string() + ": trailing bytes after checkpoint");
  if (optimizer) *optimizer = std::move(snap);
  return params;
}

}  // namespace voiceloop
