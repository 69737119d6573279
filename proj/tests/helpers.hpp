#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "voiceloop/model.hpp"
#include "voiceloop/rng.hpp"

namespace test {

inline voiceloop::HyperParams toy_hyper() {
  voiceloop::HyperParams h;
  h.d_p = 4;
  h.d_o = 3;
  h.k = 3;
  h.c = 2;
  h.n_phonemes = 8;
  h.n_speakers = 3;
  return h;
}

inline std::vector<double> random_vector(std::size_t n, voiceloop::Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline std::vector<voiceloop::PhonemeId> random_phonemes(std::size_t l, std::size_t n,
                                                         voiceloop::Rng& rng) {
  std::vector<voiceloop::PhonemeId> p(l);
  for (auto& id : p) id = rng.below(n);
  return p;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("voiceloop_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace test
