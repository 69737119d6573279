#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "voiceloop/features.hpp"
#include "voiceloop/model.hpp"

namespace voiceloop {

// Half-open coefficient range [begin, end). end == 0 means "to the end".
struct CoeffRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t resolve_end(std::size_t dim) const { return end == 0 ? dim : end; }
};

// Mel-cepstral block of 63-dim vocoder frames: 0-based indices 1..60, the
// energy coefficient at 0 and the excitation features after 60 excluded.
inline constexpr CoeffRange kVocoderCepstrum{1, 61};

// (10 / ln 10) * sqrt(2 * sum_{i in range} (a_i - b_i)^2)
double mcd(std::span<const double> a, std::span<const double> b, CoeffRange range = {});

struct DtwResult {
  std::vector<std::pair<std::size_t, std::size_t>> path;  // 0-based (i, j)
  double mean_cost = 0.0;
  double total_cost = 0.0;

  std::size_t length() const { return path.size(); }
};

// Cell cost matrix, |A| x |B|, entry (i, j) = mcd(A_i, B_j). The default
// version is OpenMP-parallel over rows.
Matrix<double> mcd_cost_matrix(const FeatureSequence& a, const FeatureSequence& b,
                               CoeffRange range = {});
namespace reference {
Matrix<double> mcd_cost_matrix(const FeatureSequence& a, const FeatureSequence& b,
                               CoeffRange range = {});
}

// DTW over a cost matrix with steps (1,0), (0,1), (1,1) and no slope
// constraint. Backtracking prefers the diagonal, then (1,0), then (0,1) on
// ties.
DtwResult dtw(const Matrix<double>& cost);

// Mean MCD along the optimal DTW alignment.
DtwResult mcd_dtw(const FeatureSequence& a, const FeatureSequence& b, CoeffRange range = {});

// Mean |W1| weight from each buffer column to the hidden layer, columns
// ordered newest (0) to oldest (k-1). For the update network only the
// buffer-fed input block is used.
struct SignificanceProfile {
  std::vector<double> update;
  std::vector<double> attention;
  std::vector<double> output;
};

std::vector<double> column_significance(const Mlp& net, std::size_t d, std::size_t k);
SignificanceProfile memory_significance(const ModelParams& params);

// Nearest-centroid speaker classifier over mean feature frames.
class CentroidClassifier {
 public:
  // Throws InvalidInput on fewer than two speakers or a speaker without
  // frames.
  static CentroidClassifier fit(const std::map<std::size_t, std::vector<FeatureSequence>>& by_speaker);

  // Speaker with the closest centroid to the mean frame; ties go to the
  // lowest id.
  std::size_t classify(const FeatureSequence& seq) const;
  const std::map<std::size_t, std::vector<double>>& centroids() const { return centroids_; }

 private:
  std::map<std::size_t, std::vector<double>> centroids_;
};

std::vector<double> mean_frame(const FeatureSequence& seq);

// For each phoneme position j, argmax_t alpha_t[j] (earliest frame on ties).
std::vector<std::size_t> attention_peaks(const AttentionTrace& trace);

bool nondecreasing(std::span<const std::size_t> values);

}  // namespace voiceloop
