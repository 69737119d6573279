// Serial reference vs OpenMP kernels at the full-size layer shapes, and
// end-to-end single-precision synthesis speed.
//
//   bench_kernels [threads] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "voiceloop/kernels.hpp"
#include "voiceloop/model.hpp"
#include "voiceloop/rng.hpp"

using namespace voiceloop;

namespace {

double seconds_per_call(const std::function<void()>& f, int repeats) {
  f();
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / repeats;
}

template <typename Real>
void fill(std::span<Real> v, Rng& rng) {
  for (auto& x : v) x = static_cast<Real>(rng.uniform(-1, 1));
}

template <typename Real>
void bench_shape(const char* label, std::size_t rows, std::size_t cols, int repeats, Rng& rng) {
  Matrix<Real> w(rows, cols);
  fill<Real>(w.flat(), rng);
  std::vector<Real> x(cols), b(rows), y(rows), g(rows), xt(cols);
  fill<Real>(std::span<Real>(x), rng);
  fill<Real>(std::span<Real>(g), rng);
  Matrix<Real> grad(rows, cols);

  const double ref_affine = seconds_per_call(
      [&] { kernels::reference::affine<Real>(w, x, b, y); }, repeats);
  const double omp_affine = seconds_per_call([&] { kernels::affine<Real>(w, x, b, y); }, repeats);
  const double ref_t = seconds_per_call(
      [&] { kernels::reference::accumulate_transposed<Real>(w, g, xt); }, repeats);
  const double omp_t = seconds_per_call(
      [&] { kernels::accumulate_transposed<Real>(w, g, xt); }, repeats);
  const double ref_o = seconds_per_call(
      [&] { kernels::reference::accumulate_outer<Real>(g, x, grad); }, repeats);
  const double omp_o = seconds_per_call(
      [&] { kernels::accumulate_outer<Real>(g, x, grad); }, repeats);

  std::printf("%-28s %5zux%-5zu affine %8.1f us / %8.1f us  W^T g %8.1f / %8.1f  outer %8.1f / %8.1f\n",
              label, rows, cols, ref_affine * 1e6, omp_affine * 1e6, ref_t * 1e6, omp_t * 1e6,
              ref_o * 1e6, omp_o * 1e6);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 0;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 200;
  if (threads > 0) kernels::set_max_threads(threads);
  std::printf("threads %d, timings reference / parallel\n", kernels::max_threads());

  const HyperParams h;
  Rng rng(7);
  const std::size_t kd = h.attention_input();
  bench_shape<float>("f32 N_a/N_o first layer", h.hidden_size(kd), kd, repeats, rng);
  bench_shape<float>("f32 N_u first layer", h.hidden_size(h.update_input()), h.update_input(),
                     repeats, rng);
  bench_shape<double>("f64 N_a/N_o first layer", h.hidden_size(kd), kd, repeats, rng);
  bench_shape<double>("f64 N_u first layer", h.hidden_size(h.update_input()), h.update_input(),
                      repeats, rng);

  const auto params = cast_params<float>(init_params(h, 11));
  std::vector<PhonemeId> sentence(100);
  for (auto& p : sentence) p = rng.below(h.n_phonemes);
  std::vector<float> z(h.d_s());
  fill<float>(std::span<float>(z), rng);
  SynthesisConfig cfg;
  cfg.ignore_stop = true;
  cfg.max_frames = 1000;
  const double s = seconds_per_call([&] { synthesize<float>(sentence, z, params, cfg); }, 3);
  std::printf("f32 synthesis: %.1f frames/s, real-time factor %.2f at 5 ms frames\n", 1000 / s,
              1000 / s * 0.005);
}
