#pragma once

// Reverse-mode gradients of the teacher-forced sequence loss
//
//   L = (1/T) sum_t (1/d_o) ||Y_t - o_t||^2
//
// through the full unrolled recurrence (no truncation), and a central
// finite-difference checker for them.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "voiceloop/features.hpp"
#include "voiceloop/model.hpp"
#include "voiceloop/teacher_forcing.hpp"

namespace voiceloop {

// One tensor per ModelParams tensor plus the speaker-embedding gradient.
struct Gradients {
  ModelParams tensors;
  std::vector<double> dz;

  explicit Gradients(const HyperParams& hyper)
      : tensors(hyper), dz(hyper.d_s(), 0.0) {}

  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double scale);
  // Euclidean norm over every tensor (dz excluded).
  double norm() const;

  // Adds dz to column `speaker` of the LUT_s gradient, the chain rule for
  // z = LUT_s[:, speaker].
  void fold_speaker(std::size_t speaker);
};

enum class GradientScope {
  kAll,          // every tensor and dz
  kSpeakerOnly,  // dz only; parameter tensors left at zero
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

// The teacher-forcing noise stream is
// Rng(derive_seed(tf.seed, stream)), so the loss is a pure function of the
// parameters for a fixed (tf.seed, stream).
LossAndGradients sequence_loss_and_grads(const ModelParams& params, std::span<const double> z,
                                         std::span<const PhonemeId> phonemes,
                                         const FeatureSequence& target,
                                         const TeacherForcingConfig& tf, std::uint64_t stream,
                                         GradientScope scope = GradientScope::kAll);

// Forward pass only; same value as sequence_loss_and_grads().loss.
double sequence_loss(const ModelParams& params, std::span<const double> z,
                     std::span<const PhonemeId> phonemes, const FeatureSequence& target,
                     const TeacherForcingConfig& tf, std::uint64_t stream);

// Teacher-forced outputs o_1..o_T (T = target length), for diagnostics.
Matrix<double> teacher_forced_outputs(const ModelParams& params, std::span<const double> z,
                                      std::span<const PhonemeId> phonemes,
                                      const FeatureSequence& target,
                                      const TeacherForcingConfig& tf, std::uint64_t stream);

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t argmax = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;

  double max_rel_error() const;
  // Aligned, human-readable table.
  void print(std::ostream& os) const;
  // Tab-separated rows with a header.
  void write_rows(std::ostream& os) const;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// (f(theta + eps e_i) - f(theta - eps e_i)) / (2 eps); theta is restored.
double central_difference(const std::function<double()>& loss, std::span<double> theta,
                          std::size_t index, double eps);

// Compares `analytic` against central differences of `loss` at the listed
// coordinates of `theta`.
TensorCheck check_coordinates(const std::string& name, const std::function<double()>& loss,
                              std::span<double> theta, std::span<const double> analytic,
                              std::span<const std::size_t> coordinates, double eps);

// init_params with hidden biases from U(0, 1) and output biases from
// U(-1/sqrt(hidden), 1/sqrt(hidden)), so hidden units start active and off
// the ReLU kink.
ModelParams generic_params(const HyperParams& hyper, std::uint64_t seed);

struct GradCheckExample {
  std::vector<PhonemeId> phonemes;
  FeatureSequence target;
  std::uint64_t stream = 0;
  std::size_t speaker = 0;  // LUT_s column used for the lut_s check
};

// Random phonemes, and a target equal to the model's own teacher-forced
// outputs plus N(0, residual^2) noise, all drawn from Rng(seed).
GradCheckExample near_target_example(const ModelParams& params, std::span<const double> z,
                                     std::size_t length, std::size_t frames,
                                     const TeacherForcingConfig& tf, std::uint64_t seed,
                                     double residual = 0.1);

// Checks every parameter tensor and dz. All tensors except lut_s are checked
// with the explicit embedding `z`; lut_s is checked with z read from its
// column example.speaker, as during training. With max_coordinates == 0 every
// coordinate is perturbed; otherwise a seeded random subset of that size
// per tensor (tensors smaller than that are checked in full).
GradCheckReport finite_diff_check(const ModelParams& params, std::span<const double> z,
                                  const GradCheckExample& example, const TeacherForcingConfig& tf,
                                  double eps, std::size_t max_coordinates = 0,
                                  std::uint64_t subsample_seed = 0);

}  // namespace voiceloop
