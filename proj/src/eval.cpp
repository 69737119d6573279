#include "voiceloop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "voiceloop/errors.hpp"

namespace voiceloop {
namespace {

const double kMcdScale = 10.0 / std::numbers::ln10;

void check_range(CoeffRange range, std::size_t dim) {
  const std::size_t end = range.resolve_end(dim);
  if (range.begin >= end || end > dim)
    throw InvalidInput("coefficient range [" + std::to_string(range.begin) + ", " +
                       std::to_string(end) + ") invalid for dimension " + std::to_string(dim));
}

void check_pair(const FeatureSequence& a, const FeatureSequence& b, CoeffRange range) {
  if (a.length() == 0 || b.length() == 0) throw InvalidInput("DTW needs two nonempty sequences");
  if (a.dim() != b.dim()) throw InvalidInput("sequences differ in feature dimension");
  check_range(range, a.dim());
}

double mcd_unchecked(const double* a, const double* b, std::size_t begin, std::size_t end) {
  double sq = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double diff = a[i] - b[i];
    sq += diff * diff;
  }
  return kMcdScale * std::sqrt(2.0 * sq);
}

}  // namespace

double mcd(std::span<const double> a, std::span<const double> b, CoeffRange range) {
  if (a.size() != b.size())
    throw InvalidInput("mcd: vectors differ in length (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  check_range(range, a.size());
  return mcd_unchecked(a.data(), b.data(), range.begin, range.resolve_end(a.size()));
}

Matrix<double> mcd_cost_matrix(const FeatureSequence& a, const FeatureSequence& b,
                               CoeffRange range) {
  check_pair(a, b, range);
  const std::size_t end = range.resolve_end(a.dim());
  Matrix<double> cost(a.length(), b.length());
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(a.length());
#pragma omp parallel for schedule(static) if (a.length() * b.length() > 4096)
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < b.length(); ++j)
      cost(i, j) = mcd_unchecked(a.frames.row(i).data(), b.frames.row(j).data(), range.begin, end);
  return cost;
}

namespace reference {
Matrix<double> mcd_cost_matrix(const FeatureSequence& a, const FeatureSequence& b,
                               CoeffRange range) {
  check_pair(a, b, range);
  Matrix<double> cost(a.length(), b.length());
  for (std::size_t i = 0; i < a.length(); ++i)
    for (std::size_t j = 0; j < b.length(); ++j)
      cost(i, j) = mcd(a.frames.row(i), b.frames.row(j), range);
  return cost;
}
}  // namespace reference

DtwResult dtw(const Matrix<double>& cost) {
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n == 0 || m == 0) throw InvalidInput("DTW needs a nonempty cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  Matrix<double> acc(n, m, inf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double best = (i == 0 && j == 0) ? 0.0 : inf;
      if (i > 0 && j > 0) best = std::min(best, acc(i - 1, j - 1));
      if (i > 0) best = std::min(best, acc(i - 1, j));
      if (j > 0) best = std::min(best, acc(i, j - 1));
      acc(i, j) = best + cost(i, j);
    }
  }

  DtwResult result;
  result.total_cost = acc(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  result.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    result.path.emplace_back(i, j);
  }
  std::reverse(result.path.begin(), result.path.end());
  result.mean_cost = result.total_cost / static_cast<double>(result.path.size());
  return result;
}

DtwResult mcd_dtw(const FeatureSequence& a, const FeatureSequence& b, CoeffRange range) {
  return dtw(mcd_cost_matrix(a, b, range));
}

std::vector<double> column_significance(const Mlp& net, std::size_t d, std::size_t k) {
  if (net.input_size() < d * k) throw InvalidInput("network input smaller than the buffer");
  std::vector<double> profile(k, 0.0);
  for (std::size_t h = 0; h < net.hidden_size(); ++h) {
    const auto row = net.w1.row(h);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t r = 0; r < d; ++r) profile[j] += std::abs(row[j * d + r]);
  }
  const double count = static_cast<double>(net.hidden_size() * d);
  for (double& v : profile) v /= count;
  return profile;
}

SignificanceProfile memory_significance(const ModelParams& params) {
  const HyperParams& h = params.hyper;
  SignificanceProfile p;
  if (h.update == BufferUpdate::kNetwork) p.update = column_significance(params.update, h.d(), h.k);
  else p.update.assign(h.k, 0.0);
  p.attention = column_significance(params.attention, h.d(), h.k);
  p.output = column_significance(params.output, h.d(), h.k);
  return p;
}

std::vector<double> mean_frame(const FeatureSequence& seq) {
  if (seq.length() == 0) throw InvalidInput("mean of an empty sequence");
  std::vector<double> mean(seq.dim(), 0.0);
  for (std::size_t t = 0; t < seq.length(); ++t)
    for (std::size_t r = 0; r < seq.dim(); ++r) mean[r] += seq.frames(t, r);
  for (double& v : mean) v /= static_cast<double>(seq.length());
  return mean;
}

CentroidClassifier CentroidClassifier::fit(
    const std::map<std::size_t, std::vector<FeatureSequence>>& by_speaker) {
  if (by_speaker.size() < 2) throw InvalidInput("classifier needs at least two speakers");
  CentroidClassifier clf;
  std::size_t dim = 0;
  for (const auto& [speaker, seqs] : by_speaker) {
    std::vector<double> sum;
    std::size_t frames = 0;
    for (const auto& seq : seqs) {
      if (dim == 0) dim = seq.dim();
      if (seq.dim() != dim) throw InvalidInput("classifier sequences differ in dimension");
      sum.resize(dim, 0.0);
      for (std::size_t t = 0; t < seq.length(); ++t)
        for (std::size_t r = 0; r < dim; ++r) sum[r] += seq.frames(t, r);
      frames += seq.length();
    }
    if (frames == 0) throw InvalidInput("speaker " + std::to_string(speaker) + " has no frames");
    for (double& v : sum) v /= static_cast<double>(frames);
    clf.centroids_.emplace(speaker, std::move(sum));
  }
  return clf;
}

std::size_t CentroidClassifier::classify(const FeatureSequence& seq) const {
  const auto mean = mean_frame(seq);
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& [speaker, centroid] : centroids_) {
    if (centroid.size() != mean.size()) throw InvalidInput("sequence dimension does not match");
    double dist = 0.0;
    for (std::size_t r = 0; r < mean.size(); ++r) dist += (mean[r] - centroid[r]) * (mean[r] - centroid[r]);
    // std::map iterates ids in increasing order, so strict < keeps the lowest id on ties.
    if (dist < best_dist) {
      best_dist = dist;
      best = speaker;
    }
  }
  return best;
}

std::vector<std::size_t> attention_peaks(const AttentionTrace& trace) {
  if (trace.alpha.rows() == 0) throw InvalidInput("attention trace is empty");
  std::vector<std::size_t> peaks(trace.alpha.cols(), 0);
  for (std::size_t j = 0; j < trace.alpha.cols(); ++j)
    for (std::size_t t = 1; t < trace.alpha.rows(); ++t)
      if (trace.alpha(t, j) > trace.alpha(peaks[j], j)) peaks[j] = t;
  return peaks;
}

bool nondecreasing(std::span<const std::size_t> values) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[i - 1]) return false;
  return true;
}

}  // namespace voiceloop
