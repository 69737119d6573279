#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "helpers.hpp"
#include "voiceloop/errors.hpp"
#include "voiceloop/eval.hpp"

using namespace voiceloop;

namespace {

FeatureSequence seq_from(std::initializer_list<std::initializer_list<double>> rows) {
  FeatureSequence f;
  f.frames = Matrix<double>(rows.size(), rows.begin()->size());
  std::size_t t = 0;
  for (const auto& row : rows) {
    std::size_t r = 0;
    for (double v : row) f.frames(t, r++) = v;
    ++t;
  }
  return f;
}

FeatureSequence random_seq(std::size_t t, std::size_t d, Rng& rng) {
  FeatureSequence f;
  f.frames = Matrix<double>(t, d);
  for (double& v : f.frames.flat()) v = rng.uniform(-1, 1);
  return f;
}

// Exhaustive minimum over every monotone path with unit steps.
double brute_force_dtw(const Matrix<double>& cost) {
  const std::size_t n = cost.rows(), m = cost.cols();
  std::function<double(std::size_t, std::size_t)> best = [&](std::size_t i, std::size_t j) -> double {
    if (i == n - 1 && j == m - 1) return cost(i, j);
    double rest = std::numeric_limits<double>::infinity();
    if (i + 1 < n) rest = std::min(rest, best(i + 1, j));
    if (j + 1 < m) rest = std::min(rest, best(i, j + 1));
    if (i + 1 < n && j + 1 < m) rest = std::min(rest, best(i + 1, j + 1));
    return cost(i, j) + rest;
  };
  return best(0, 0);
}

}  // namespace

TEST_CASE("mcd examples") {
  const std::vector<double> a{0.5, 1.0, -2.0}, b{0.5, 2.0, -2.0};
  CHECK(mcd(a, a) == 0.0);
  CHECK(mcd(a, b) == doctest::Approx(6.14185).epsilon(1e-6));
  CHECK(mcd(a, b) == doctest::Approx(10 / std::numbers::ln10 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(mcd(a, b) == mcd(b, a));
  CHECK(mcd(a, b, CoeffRange{2, 0}) == 0.0);
  CHECK(mcd(a, b, CoeffRange{1, 2}) == mcd(a, b));
  CHECK_THROWS_AS(mcd(a, std::vector<double>{1.0, 2.0}), InvalidInput);
  CHECK_THROWS_AS(mcd(a, b, CoeffRange{0, 4}), InvalidInput);
  CHECK_THROWS_AS(mcd(a, b, CoeffRange{2, 1}), InvalidInput);
}

TEST_CASE("mcd properties on random frames") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = test::random_vector(63, rng), b = test::random_vector(63, rng);
    const double ab = mcd(a, b, kVocoderCepstrum);
    CHECK(ab > 0);
    CHECK(ab == mcd(b, a, kVocoderCepstrum));
    auto c = b;
    c[0] += 5.0;
    c[62] -= 5.0;  // outside the cepstral block
    CHECK(mcd(a, c, kVocoderCepstrum) == ab);
    CHECK(mcd(a, a, kVocoderCepstrum) == 0.0);
  }
}

TEST_CASE("dtw examples") {
  const auto v = seq_from({{1.0, 2.0}});
  const auto vv = seq_from({{1.0, 2.0}, {1.0, 2.0}});
  const auto r = mcd_dtw(v, vv);
  CHECK(r.mean_cost == 0.0);
  CHECK(r.path == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {0, 1}});

  Rng rng(1);
  const auto a = random_seq(6, 4, rng);
  const auto self = mcd_dtw(a, a);
  CHECK(self.mean_cost == 0.0);
  CHECK(self.length() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(self.path[i] == std::pair<std::size_t, std::size_t>{i, i});

  // Diagonal preferred on ties: all-zero costs give the pure diagonal.
  const Matrix<double> flat(3, 3);
  CHECK(dtw(flat).length() == 3);

  // Hand-worked 2 x 3 case.
  Matrix<double> cost(2, 3);
  cost(0, 0) = 1;
  cost(0, 1) = 5;
  cost(0, 2) = 9;
  cost(1, 0) = 2;
  cost(1, 1) = 1;
  cost(1, 2) = 1;
  const auto hand = dtw(cost);
  CHECK(hand.total_cost == 3.0);
  CHECK(hand.path == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}, {1, 2}});
  CHECK(hand.mean_cost == 1.0);

  CHECK_THROWS_AS(dtw(Matrix<double>(0, 3)), InvalidInput);
}

TEST_CASE("dtw properties on random inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(5), m = 1 + rng.below(5);
    const auto a = random_seq(n, 3, rng), b = random_seq(m, 3, rng);
    const auto cost = mcd_cost_matrix(a, b);
    CHECK(cost == reference::mcd_cost_matrix(a, b));
    const auto r = dtw(cost);
    REQUIRE(!r.path.empty());
    CHECK(r.path.front() == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(r.path.back() == std::pair<std::size_t, std::size_t>{n - 1, m - 1});
    double total = 0;
    for (std::size_t s = 0; s < r.path.size(); ++s) {
      total += cost(r.path[s].first, r.path[s].second);
      if (s == 0) continue;
      const auto di = r.path[s].first - r.path[s - 1].first;
      const auto dj = r.path[s].second - r.path[s - 1].second;
      CHECK(di <= 1);
      CHECK(dj <= 1);
      CHECK(di + dj >= 1);
    }
    CHECK(r.total_cost == doctest::Approx(total).epsilon(1e-12));
    CHECK(r.mean_cost == doctest::Approx(total / r.path.size()).epsilon(1e-12));
    CHECK(r.total_cost == doctest::Approx(brute_force_dtw(cost)).epsilon(1e-12));
    if (n == m) {
      double diagonal = 0;
      for (std::size_t i = 0; i < n; ++i) diagonal += cost(i, i);
      CHECK(r.total_cost <= diagonal + 1e-12);
    }
  }
}

TEST_CASE("cost matrix uses the coefficient range") {
  const auto a = seq_from({{9.0, 1.0, 2.0}});
  const auto b = seq_from({{0.0, 1.0, 2.0}, {0.0, 1.0, 3.0}});
  const auto c = mcd_cost_matrix(a, b, CoeffRange{1, 0});
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == doctest::Approx(6.14185).epsilon(1e-6));
  const auto d = FeatureSequence{Matrix<double>(2, 4)};
  CHECK_THROWS_AS(mcd_cost_matrix(a, d), InvalidInput);
}

TEST_CASE("memory significance examples") {
  auto h = test::toy_hyper();
  ModelParams p(h);
  const std::size_t d = h.d(), k = h.k;

  std::fill(p.attention.w1.flat().begin(), p.attention.w1.flat().end(), 1.0);
  const auto ones = column_significance(p.attention, d, k);
  REQUIRE(ones.size() == k);
  for (double v : ones) CHECK(v == 1.0);

  // Only buffer column 0 (the newest) feeds the output network.
  for (std::size_t hdn = 0; hdn < p.output.hidden_size(); ++hdn)
    for (std::size_t r = 0; r < d; ++r) p.output.w1(hdn, r) = 0.5;
  const auto first = column_significance(p.output, d, k);
  CHECK(first[0] == 0.5);
  for (std::size_t j = 1; j < k; ++j) CHECK(first[j] == 0.0);

  // The update network's extra inputs (context, previous output) are ignored.
  for (std::size_t hdn = 0; hdn < p.update.hidden_size(); ++hdn)
    for (std::size_t i = k * d; i < p.update.input_size(); ++i) p.update.w1(hdn, i) = 7.0;
  const auto prof = memory_significance(p);
  for (double v : prof.update) CHECK(v == 0.0);
  CHECK(prof.attention == ones);
  CHECK(prof.output == first);
}

TEST_CASE("memory significance is nonnegative and sign-invariant") {
  auto h = test::toy_hyper();
  const auto p = init_params(h, 4);
  ModelParams flipped = p;
  for (auto* net : {&flipped.attention, &flipped.update, &flipped.output})
    for (double& v : net->w1.flat()) v = -v;
  const auto a = memory_significance(p), b = memory_significance(flipped);
  CHECK(a.update == b.update);
  CHECK(a.attention == b.attention);
  CHECK(a.output == b.output);
  for (const auto* v : {&a.update, &a.attention, &a.output}) {
    CHECK(v->size() == h.k);
    for (double x : *v) CHECK(x > 0.0);
  }

  h.update = BufferUpdate::kConcat;
  const auto loopless = memory_significance(init_params(h, 4));
  for (double x : loopless.update) CHECK(x == 0.0);
}

TEST_CASE("centroid classifier") {
  std::map<std::size_t, std::vector<FeatureSequence>> by;
  by[0] = {seq_from({{0.0, 0.0}, {0.2, 0.0}})};
  by[1] = {seq_from({{5.0, 5.0}}), seq_from({{5.0, 6.0}, {5.0, 4.0}})};
  by[2] = {seq_from({{-5.0, 5.0}})};
  const auto clf = CentroidClassifier::fit(by);
  CHECK(clf.centroids().at(0) == std::vector<double>{0.1, 0.0});
  CHECK(clf.centroids().at(1) == std::vector<double>{5.0, 5.0});
  for (const auto& [spk, seqs] : by)
    for (const auto& s : seqs) CHECK(clf.classify(s) == spk);
  CHECK(clf.classify(seq_from({{4.0, 4.0}, {6.0, 7.0}})) == 1);

  std::map<std::size_t, std::vector<FeatureSequence>> tie;
  tie[3] = {seq_from({{1.0, 1.0}})};
  tie[1] = {seq_from({{1.0, 1.0}})};
  CHECK(CentroidClassifier::fit(tie).classify(seq_from({{0.0, 0.0}})) == 1);
  std::map<std::size_t, std::vector<FeatureSequence>> equidistant;
  equidistant[4] = {seq_from({{1.0, 0.0}})};
  equidistant[2] = {seq_from({{-1.0, 0.0}})};
  CHECK(CentroidClassifier::fit(equidistant).classify(seq_from({{0.0, 3.0}})) == 2);

  std::map<std::size_t, std::vector<FeatureSequence>> one;
  one[0] = by[0];
  CHECK_THROWS_AS(CentroidClassifier::fit(one), InvalidInput);
  auto empty = by;
  empty[2].clear();
  CHECK_THROWS_AS(CentroidClassifier::fit(empty), InvalidInput);
}

TEST_CASE("attention peaks") {
  AttentionTrace single;
  single.alpha = Matrix<double>(4, 1);
  single.alpha(2, 0) = 0.9;
  single.alpha(3, 0) = 0.1;
  CHECK(attention_peaks(single) == std::vector<std::size_t>{2});

  AttentionTrace trace;
  trace.alpha = Matrix<double>(5, 3);
  const double rows[5][3] = {{0.9, 0.1, 0.0}, {0.5, 0.5, 0.0}, {0.2, 0.7, 0.1},
                             {0.0, 0.7, 0.3}, {0.0, 0.1, 0.9}};
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < 3; ++j) trace.alpha(t, j) = rows[t][j];
  const auto peaks = attention_peaks(trace);
  CHECK(peaks == std::vector<std::size_t>{0, 2, 4});
  CHECK(nondecreasing(peaks));
  CHECK_FALSE(nondecreasing(std::vector<std::size_t>{0, 3, 2}));
  CHECK(nondecreasing(std::vector<std::size_t>{}));
  CHECK_THROWS_AS(attention_peaks(AttentionTrace{}), InvalidInput);
}

TEST_CASE("mean frame") {
  CHECK(mean_frame(seq_from({{1.0, 2.0}, {3.0, 6.0}})) == std::vector<double>{2.0, 4.0});
}
