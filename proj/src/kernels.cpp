#include "voiceloop/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstddef>

namespace voiceloop::kernels {
namespace {

// Below this many multiply-adds a kernel runs serially; thread start-up
// costs more than the work.
constexpr std::size_t kParallelThreshold = 1 << 15;

int g_max_threads = 0;

int team_size() { return g_max_threads > 0 ? g_max_threads : omp_get_max_threads(); }

}  // namespace

void set_max_threads(int n) { g_max_threads = std::max(0, n); }
int max_threads() { return team_size(); }

template <typename Real>
void affine(const Matrix<Real>& w, std::span<const Real> x, std::span<const Real> b,
            std::span<Real> y) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(w.rows());
  const std::size_t cols = w.cols();
  const Real* xs = x.data();
  const bool parallel = w.size() >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel) num_threads(team_size())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const Real* wr = w.data() + static_cast<std::size_t>(r) * cols;
    Real acc = 0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xs[c];
    y[r] = b.empty() ? acc : acc + b[r];
  }
}

template <typename Real>
void accumulate_transposed(const Matrix<Real>& w, std::span<const Real> g, std::span<Real> y) {
  // Parallel over blocks of output columns; each block walks every row in
  // order, so the summation order matches the reference exactly.
  constexpr std::ptrdiff_t kBlock = 256;
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((cols + kBlock - 1) / kBlock);
  const bool parallel = w.size() >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel) num_threads(team_size())
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t begin = static_cast<std::size_t>(blk * kBlock);
    const std::size_t end = std::min(cols, begin + kBlock);
    Real* out = y.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const Real gr = g[r];
      if (gr == Real(0)) continue;
      const Real* wr = w.data() + r * cols;
#pragma omp simd
      for (std::size_t c = begin; c < end; ++c) out[c] += wr[c] * gr;
    }
  }
}

template <typename Real>
void accumulate_outer(std::span<const Real> g, std::span<const Real> x, Matrix<Real>& out) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(out.rows());
  const std::size_t cols = out.cols();
  const Real* xs = x.data();
  const bool parallel = out.size() >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel) num_threads(team_size())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const Real gr = g[r];
    if (gr == Real(0)) continue;
    Real* orow = out.data() + static_cast<std::size_t>(r) * cols;
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) orow[c] += gr * xs[c];
  }
}

namespace reference {

template <typename Real>
void affine(const Matrix<Real>& w, std::span<const Real> x, std::span<const Real> b,
            std::span<Real> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    Real acc = 0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
    y[r] = b.empty() ? acc : acc + b[r];
  }
}

template <typename Real>
void accumulate_transposed(const Matrix<Real>& w, std::span<const Real> g, std::span<Real> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    if (g[r] == Real(0)) continue;
    for (std::size_t c = 0; c < w.cols(); ++c) y[c] += w(r, c) * g[r];
  }
}

template <typename Real>
void accumulate_outer(std::span<const Real> g, std::span<const Real> x, Matrix<Real>& out) {
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (g[r] == Real(0)) continue;
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += g[r] * x[c];
  }
}

}  // namespace reference

#define VOICELOOP_INSTANTIATE(NS, Real)                                                         \
  template void NS::affine<Real>(const Matrix<Real>&, std::span<const Real>,                    \
                                 std::span<const Real>, std::span<Real>);                       \
  template void NS::accumulate_transposed<Real>(const Matrix<Real>&, std::span<const Real>,     \
                                                std::span<Real>);                               \
  template void NS::accumulate_outer<Real>(std::span<const Real>, std::span<const Real>,        \
                                           Matrix<Real>&);

VOICELOOP_INSTANTIATE(kernels, float)
VOICELOOP_INSTANTIATE(kernels, double)
VOICELOOP_INSTANTIATE(kernels::reference, float)
VOICELOOP_INSTANTIATE(kernels::reference, double)

#undef VOICELOOP_INSTANTIATE

}  // namespace voiceloop::kernels
