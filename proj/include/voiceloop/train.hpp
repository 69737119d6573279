#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voiceloop/corpus.hpp"
#include "voiceloop/grad.hpp"
#include "voiceloop/model.hpp"
#include "voiceloop/teacher_forcing.hpp"
#include "voiceloop/weights_io.hpp"

namespace voiceloop {

enum class OptimizerKind : std::uint32_t { kSgd = 0, kMomentum = 1, kAdam = 2 };

const char* to_string(OptimizerKind kind);
// Accepts "sgd", "momentum", "adam"; throws InvalidInput otherwise.
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 1;
  // Utterances per optimizer step; the batch gradient is the sum over the
  // batch, not the mean.
  std::size_t batch_size = 1;
  double clip_norm = 0.0;  // global max-norm, 0 disables
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // epochs, 0 disables
  std::filesystem::path checkpoint_path;
  int jobs = 0;  // per-utterance workers, 0 = OpenMP default

  // Throws InvalidInput unless lr >= 0, epochs >= 1, batch_size >= 1.
  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps taken so far
  double mean_loss = 0.0;
  double seconds = 0.0;
  double param_norm = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;

  void write_tsv(std::ostream& os) const;
};

// First-order optimizer over a full ModelParams tensor set.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const HyperParams& hyper);

  void step(ModelParams& params, const ModelParams& grads);
  std::uint64_t steps() const { return step_; }

  OptimizerSnapshot snapshot() const;
  void restore(const OptimizerSnapshot& snap);

 private:
  TrainConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<ModelParams> slots_;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains every tensor (LUT_s included) on frame-aligned teacher-forced
// sequences: each utterance is unrolled for exactly its ground-truth length.
// Utterances are shuffled per epoch with a seeded generator and their
// gradients computed concurrently, then summed in batch order. Throws
// InvalidInput for an empty corpus or speaker ids >= N, NumericalError on a
// non-finite or diverging (> 1e6) loss.
TrainResult train(ModelParams params, std::span<const Utterance> corpus, const TrainConfig& cfg,
                  const TeacherForcingConfig& tf, const EpochCallback& on_epoch = {},
                  const OptimizerSnapshot* resume = nullptr);

struct FitResult {
  std::vector<double> z;
  double loss = 0.0;  // mean teacher-forced loss at the returned z
  std::vector<double> history;  // mean loss per iteration, before its update
};

// Fits a new speaker embedding with every model tensor frozen. Starts from
// `initial_z` or a seeded draw from U(-1/sqrt(d_s), 1/sqrt(d_s)), then runs
// cfg.epochs passes of plain SGD (cfg.learning_rate, cfg.batch_size) on the
// teacher-forced loss. Speaker ids in `samples` are ignored.
FitResult fit_speaker(const ModelParams& params, std::span<const Utterance> samples,
                      const TrainConfig& cfg, const TeacherForcingConfig& tf,
                      std::optional<std::vector<double>> initial_z = std::nullopt);

// Runs `prime_phonemes` through the model with the normal stopping rule and
// returns the final buffer, to be passed as the prime of a later synthesis.
Buffer prime_buffer(const ModelParams& params, std::span<const double> z,
                    std::span<const PhonemeId> prime_phonemes, const SynthesisConfig& cfg = {});

}  // namespace voiceloop
