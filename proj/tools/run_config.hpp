#pragma once

// Run configuration for the command-line tool.
//
// A JSON file supplies any subset of the sections below; missing keys keep
// their defaults and unknown keys are rejected. Command-line flags are
// applied after the file, so a flag always wins over the file, which wins
// over the built-in default.
//
//   {
//     "seed": 1,
//     "model":    {"d_p", "d_o", "k", "c", "n_phonemes", "n_speakers",
//                  "hidden_divisor", "update": "network" | "concat"},
//     "train":    {"optimizer": "sgd" | "momentum" | "adam", "learning_rate",
//                  "momentum", "beta1", "beta2", "epsilon", "epochs",
//                  "batch_size", "clip_norm", "checkpoint_interval"},
//     "teacher_forcing": {"noise_std", "detach_previous_output"},
//     "synthesis": {"stop_margin", "frames_per_phoneme", "max_frames"},
//     "fit":      {"learning_rate", "epochs", "batch_size"},
//     "corpus":   {"n_speakers", "n_sentences", "min_phonemes",
//                  "max_phonemes", "min_frames", "max_frames", "d_o",
//                  "n_phonemes", "template_scale", "offset_scale",
//                  "duration_min", "duration_max", "duration_multipliers",
//                  "noise_std", "frame_shift_ms"}
//   }
//
// Every random stream is derived from "seed" (see apply_seed).

#include <cstdint>
#include <filesystem>
#include <string>

#include "voiceloop/corpus.hpp"
#include "voiceloop/model.hpp"
#include "voiceloop/teacher_forcing.hpp"
#include "voiceloop/train.hpp"

namespace voiceloop::cli {

struct RunConfig {
  std::uint64_t seed = 1;
  HyperParams model;
  TrainConfig train;
  TeacherForcingConfig teacher_forcing;
  SynthesisConfig synthesis;
  TrainConfig fit;
  SyntheticCorpusSpec corpus;

  RunConfig();

  // Seeds for parameter init, shuffling, teacher-forcing noise, speaker
  // fitting and corpus generation, all derived from `seed`.
  std::uint64_t init_seed() const;
  void apply_seed(std::uint64_t new_seed);
};

// Throws FormatError on unreadable JSON, a type mismatch or an unknown key.
RunConfig load_config(const std::filesystem::path& path);
void merge_config(RunConfig& cfg, const std::string& json_text);

// Effective configuration as JSON, for logs.
std::string dump_config(const RunConfig& cfg);

}  // namespace voiceloop::cli
