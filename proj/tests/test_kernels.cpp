#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "voiceloop/kernels.hpp"
#include "voiceloop/rng.hpp"

using namespace voiceloop;

namespace {

template <typename Real>
Matrix<Real> random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix<Real> m(rows, cols);
  for (auto& v : m.flat()) v = static_cast<Real>(rng.uniform(-1, 1));
  return m;
}

template <typename Real>
std::vector<Real> random_vector(std::size_t n, Rng& rng, double zero_fraction = 0.0) {
  std::vector<Real> v(n);
  for (auto& x : v) x = rng.uniform() < zero_fraction ? Real(0) : static_cast<Real>(rng.uniform(-1, 1));
  return v;
}

template <typename Real>
void require_close(std::span<const Real> a, std::span<const Real> b, double tol) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])) /
                                (1.0 + std::abs(static_cast<double>(b[i]))));
  CHECK(worst <= tol);
}

// Shapes on both sides of the parallel threshold, including the full-size
// first layers.
const std::size_t kShapes[][2] = {{1, 1}, {3, 7}, {30, 638}, {319, 67}, {638, 6380}, {669, 6699}};

template <typename Real>
void check_against_reference(double tol) {
  Rng rng(11);
  for (const auto& shape : kShapes) {
    CAPTURE(shape[0]);
    CAPTURE(shape[1]);
    const auto w = random_matrix<Real>(shape[0], shape[1], rng);
    const auto x = random_vector<Real>(shape[1], rng);
    const auto b = random_vector<Real>(shape[0], rng);
    const auto g = random_vector<Real>(shape[0], rng, 0.3);

    std::vector<Real> y(shape[0]), y_ref(shape[0]);
    kernels::affine<Real>(w, x, b, y);
    kernels::reference::affine<Real>(w, x, b, y_ref);
    require_close<Real>(y, y_ref, tol);
    kernels::affine<Real>(w, x, {}, y);
    kernels::reference::affine<Real>(w, x, {}, y_ref);
    require_close<Real>(y, y_ref, tol);

    auto t = random_vector<Real>(shape[1], rng);
    auto t_ref = t;
    kernels::accumulate_transposed<Real>(w, g, t);
    kernels::reference::accumulate_transposed<Real>(w, g, t_ref);
    require_close<Real>(t, t_ref, tol);

    auto o = random_matrix<Real>(shape[0], shape[1], rng);
    auto o_ref = o;
    kernels::accumulate_outer<Real>(g, x, o);
    kernels::reference::accumulate_outer<Real>(g, x, o_ref);
    require_close<Real>(o.flat(), o_ref.flat(), tol);
  }
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference (double)") {
  check_against_reference<double>(1e-12);
}

TEST_CASE("parallel kernels agree with the serial reference (float)") {
  check_against_reference<float>(2e-4);
}

TEST_CASE("kernel results do not depend on the thread count") {
  Rng rng(5);
  const auto w = random_matrix<double>(669, 6699, rng);
  const auto x = random_vector<double>(6699, rng);
  const auto g = random_vector<double>(669, rng, 0.2);
  const int saved = kernels::max_threads();

  std::vector<std::vector<double>> ys, ts;
  std::vector<Matrix<double>> os;
  for (int threads : {1, 2, 4}) {
    kernels::set_max_threads(threads);
    std::vector<double> y(669), t(6699, 0.5);
    Matrix<double> o(669, 6699, 0.25);
    kernels::affine<double>(w, x, {}, y);
    kernels::accumulate_transposed<double>(w, g, t);
    kernels::accumulate_outer<double>(g, x, o);
    ys.push_back(y);
    ts.push_back(t);
    os.push_back(o);
  }
  kernels::set_max_threads(saved);
  for (std::size_t i = 1; i < ys.size(); ++i) {
    CHECK(ys[i] == ys[0]);
    CHECK(ts[i] == ts[0]);
    CHECK(os[i] == os[0]);
  }
}

TEST_CASE("affine computes W x + b") {
  Matrix<double> w(2, 3);
  w(0, 0) = 1; w(0, 1) = 2; w(0, 2) = 3;
  w(1, 0) = -1; w(1, 1) = 0; w(1, 2) = 0.5;
  const std::vector<double> x{1, 1, 2}, b{0.5, -1};
  std::vector<double> y(2);
  kernels::affine<double>(w, x, b, y);
  CHECK(y[0] == 9.5);
  CHECK(y[1] == -1.0);

  std::vector<double> t{1, 1, 1};
  const std::vector<double> g{2, -1};
  kernels::accumulate_transposed<double>(w, g, t);
  CHECK(t == std::vector<double>{4, 5, 6.5});

  Matrix<double> o(2, 3);
  kernels::accumulate_outer<double>(g, x, o);
  CHECK(o(0, 2) == 4);
  CHECK(o(1, 0) == -1);
}
