#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "voiceloop/features.hpp"
#include "voiceloop/tensor.hpp"

namespace voiceloop {

struct Utterance {
  std::string id;
  std::size_t speaker = 0;
  std::vector<PhonemeId> phonemes;
  FeatureSequence features;
};

struct ManifestRow {
  std::string utterance_id;
  std::size_t speaker = 0;
  std::vector<PhonemeId> phonemes;
  std::filesystem::path features;  // resolved against the manifest directory
};

// Tab-separated, header "utterance_id speaker phonemes features". The
// phonemes column holds space-separated ids inline, or "@path" naming a file
// of whitespace-separated ids. Relative paths resolve against the manifest's
// directory.
struct CorpusManifest {
  std::vector<ManifestRow> rows;

  std::size_t speaker_count() const;

  // Throws FormatError on malformed rows, missing files or non-dense
  // speaker ids.
  static CorpusManifest load(const std::filesystem::path& path);
  // Feature paths are written relative to the manifest directory when they
  // live under it.
  void save(const std::filesystem::path& path) const;
};

// Reads every feature file; throws FormatError on a dimension mismatch.
std::vector<Utterance> load_corpus(const CorpusManifest& manifest, std::size_t expected_dim = 0);

// Deterministic stand-in corpus. Every speaker reads every sentence.
//
//   phoneme templates  b_p ~ U(-template_scale, template_scale)^{d_o}
//   speaker offsets    ~ U(-offset_scale, offset_scale)^{d_o}
//   duration mults     ~ U(duration_min, duration_max) unless listed
//   frames per phoneme = max(1, round(base * multiplier)), base drawn per
//                        (sentence, position) from [min_frames, max_frames]
//   frame f of segment i = b_{s_i} + (f / n_i)(b_{s_{i+1}} - b_{s_i})
//                          (last segment flat) + offset + N(0, noise_std^2)
struct SyntheticCorpusSpec {
  std::size_t n_speakers = 2;
  std::size_t n_sentences = 8;
  std::size_t min_phonemes = 4;
  std::size_t max_phonemes = 6;
  std::size_t min_frames = 6;
  std::size_t max_frames = 10;
  std::size_t d_o = 8;
  std::size_t n_phonemes = 42;
  double template_scale = 1.0;
  double offset_scale = 1.0;
  double duration_min = 0.8;
  double duration_max = 1.2;
  std::vector<double> duration_multipliers;  // overrides the draw when non-empty
  double noise_std = 0.01;
  double frame_shift_ms = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticTruth {
  Matrix<double> templates;  // n_phonemes x d_o
  Matrix<double> offsets;    // n_speakers x d_o
  std::vector<double> duration_multipliers;
  std::vector<std::vector<PhonemeId>> sentences;
};

struct SyntheticCorpus {
  std::vector<Utterance> utterances;  // speaker-major: speaker s, sentence i at s * n + i
  SyntheticTruth truth;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusSpec& spec);

// Writes features/<id>.vlf, manifest.tsv and truth.tsv under `dir`.
CorpusManifest generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                         const std::filesystem::path& dir);

}  // namespace voiceloop
