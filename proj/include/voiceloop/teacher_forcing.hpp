#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voiceloop/rng.hpp"

namespace voiceloop {

// Noisy teacher forcing: during training the "previous output" fed to the
// update network is (o_{t-1} + Y_{t-1}) / 2 + eta, eta ~ N(0, noise_std^2 I),
// drawn once per frame.
struct TeacherForcingConfig {
  double noise_std = 2.0;
  std::uint64_t seed = 0;
  // Treat o_{t-1} as a constant in the mixture (no gradient through it).
  bool detach_previous_output = false;
};

std::vector<double> teacher_forced_input(std::span<const double> o_prev,
                                         std::span<const double> y_prev,
                                         const TeacherForcingConfig& tf, Rng& rng);

}  // namespace voiceloop
