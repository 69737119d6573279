#pragma once

// Forward computation of the buffer-memory synthesis model.
//
// One generation step reads the previous buffer S_{t-1} (d x k) three ways:
//   attention:  [kappa, beta, gamma] = N_a(flat S_{t-1}); GMM over input
//               positions 1..l with strictly increasing means
//   update:     u = N_u([flat S_{t-1}, context + tanh(F_u z), o_{t-1}])
//               S_t = u shifted into column 1, oldest column dropped
//   output:     o_t = N_o(flat S_t) + F_o z
//
// Buffers are flattened column-major with the newest column first, so the
// first d inputs of every network see S[:,1].

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "voiceloop/tensor.hpp"

namespace voiceloop {

// How the new buffer column is produced. kConcat is the loop-less ablation
// u = [c_t, o_{t-1}] which ignores the buffer and the speaker projection.
enum class BufferUpdate : std::uint32_t { kNetwork = 0, kConcat = 1 };

struct HyperParams {
  std::size_t d_p = 256;
  std::size_t d_o = 63;
  std::size_t k = 20;
  std::size_t c = 10;
  std::size_t n_phonemes = 42;
  std::size_t n_speakers = 85;
  std::size_t hidden_divisor = 10;
  BufferUpdate update = BufferUpdate::kNetwork;

  std::size_t d() const { return d_p + d_o; }
  std::size_t d_s() const { return d_p; }
  std::size_t hidden_size(std::size_t input) const {
    const std::size_t h = input / hidden_divisor;
    return h == 0 ? 1 : h;
  }
  std::size_t attention_input() const { return k * d(); }
  std::size_t update_input() const { return k * d() + d_p + d_o; }
  std::size_t output_input() const { return k * d(); }

  // Throws InvalidInput if any dimension is zero.
  void validate() const;

  bool operator==(const HyperParams&) const = default;
};

// Two-layer perceptron y = W2 relu(W1 x + b1) + b2.
template <typename Real>
struct BasicMlp {
  Matrix<Real> w1;
  std::vector<Real> b1;
  Matrix<Real> w2;
  std::vector<Real> b2;

  BasicMlp() = default;
  BasicMlp(std::size_t in, std::size_t hidden, std::size_t out)
      : w1(hidden, in), b1(hidden, Real(0)), w2(out, hidden), b2(out, Real(0)) {}

  std::size_t input_size() const { return w1.cols(); }
  std::size_t hidden_size() const { return w1.rows(); }
  std::size_t output_size() const { return w2.rows(); }

  bool operator==(const BasicMlp&) const = default;
};

template <typename Real>
struct BasicParams {
  HyperParams hyper;
  Matrix<Real> lut_p;  // d_p x n_phonemes, one column per phoneme
  Matrix<Real> lut_s;  // d_s x N, one column per training speaker
  Matrix<Real> f_u;    // d_p x d_s
  Matrix<Real> f_o;    // d_o x d_s
  BasicMlp<Real> attention;  // N_a: kd -> 3c
  BasicMlp<Real> update;     // N_u: kd + d_p + d_o -> d
  BasicMlp<Real> output;     // N_o: kd -> d_o

  // Zero-valued tensors with the shapes implied by `hyper`.
  explicit BasicParams(const HyperParams& hyper = HyperParams{});

  // Visits every tensor in serialization order as (name, span).
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  std::vector<Real> speaker(std::size_t id) const;

  bool operator==(const BasicParams&) const = default;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f("lut_p", self.lut_p.flat());
    f("lut_s", self.lut_s.flat());
    f("f_u", self.f_u.flat());
    f("f_o", self.f_o.flat());
    visit_mlp("attention", self.attention, f);
    visit_mlp("update", self.update, f);
    visit_mlp("output", self.output, f);
  }
  template <typename Mlp, typename F>
  static void visit_mlp(const std::string& prefix, Mlp& net, F& f) {
    f(prefix + ".w1", net.w1.flat());
    f(prefix + ".b1", std::span(net.b1));
    f(prefix + ".w2", net.w2.flat());
    f(prefix + ".b2", std::span(net.b2));
  }
};

using Mlp = BasicMlp<double>;
using ModelParams = BasicParams<double>;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, drawn from
// Rng(seed) in serialization order. Lookup tables use fan_in = their row
// count.
ModelParams init_params(const HyperParams& hyper, std::uint64_t seed);

std::size_t parameter_count(const HyperParams& hyper);

template <typename To, typename From>
BasicParams<To> cast_params(const BasicParams<From>& params);

// Working memory S, d rows by k columns, column 0 newest.
template <typename Real>
class BasicBuffer {
 public:
  BasicBuffer() = default;
  BasicBuffer(std::size_t d, std::size_t k) : d_(d), k_(k), data_(d * k, Real(0)) {}

  std::size_t rows() const { return d_; }
  std::size_t cols() const { return k_; }

  Real& operator()(std::size_t r, std::size_t j) { return data_[j * d_ + r]; }
  const Real& operator()(std::size_t r, std::size_t j) const { return data_[j * d_ + r]; }
  std::span<const Real> column(std::size_t j) const { return {data_.data() + j * d_, d_}; }
  std::span<const Real> flat() const { return data_; }
  std::span<Real> flat() { return data_; }

  // Column j+1 <- column j for all j, column 0 <- u.
  void shift_insert(std::span<const Real> u);

  bool operator==(const BasicBuffer&) const = default;

 private:
  std::size_t d_ = 0;
  std::size_t k_ = 0;
  std::vector<Real> data_;
};

using Buffer = BasicBuffer<double>;

// Phoneme embedding matrix E, d_p x l.
template <typename Real>
struct BasicSentenceEncoding {
  std::vector<PhonemeId> phonemes;
  Matrix<Real> e;

  std::size_t length() const { return phonemes.size(); }
};

using SentenceEncoding = BasicSentenceEncoding<double>;

struct AttentionDetail {
  std::vector<double> gamma_prime;
  std::vector<double> sigma_sq;
  Matrix<double> phi;  // c x l
};

struct AttentionStepOutput {
  std::vector<double> alpha;    // l
  std::vector<double> context;  // d_p
  std::vector<double> mu;       // c, the new means
  std::optional<AttentionDetail> detail;
};

struct BufferStepOutput {
  std::vector<double> u;
  Buffer buffer;
};

struct SynthesisConfig {
  double stop_margin = 1.0;
  std::size_t frames_per_phoneme = 20;
  // Overrides frames_per_phoneme * l when set.
  std::optional<std::size_t> max_frames;
  // Skip the attention stopping rule; run to the frame cap.
  bool ignore_stop = false;

  std::size_t frame_cap(std::size_t length) const {
    return max_frames ? *max_frames : frames_per_phoneme * length;
  }
};

enum class StopReason { kAttentionPassedEnd, kMaxFrames };

const char* to_string(StopReason reason);

template <typename Real>
struct BasicAttentionTrace {
  Matrix<Real> alpha;  // T x l
  Matrix<Real> mu;     // T x c
};

template <typename Real>
struct BasicSynthesisResult {
  Matrix<Real> frames;  // T x d_o
  BasicAttentionTrace<Real> trace;
  StopReason stop_reason = StopReason::kMaxFrames;
  BasicBuffer<Real> final_buffer;
};

using AttentionTrace = BasicAttentionTrace<double>;
using SynthesisResult = BasicSynthesisResult<double>;

// Throws InvalidInput on an empty list or an id outside [0, n_phonemes).
template <typename Real>
BasicSentenceEncoding<Real> encode_sentence(std::span<const PhonemeId> phonemes,
                                            const BasicParams<Real>& params);

// Top d_p rows of every column = z, remaining d_o rows zero.
template <typename Real>
BasicBuffer<Real> init_buffer(std::span<const Real> z, const HyperParams& hyper);

AttentionStepOutput attention_step(const Buffer& s_prev, std::span<const double> mu_prev,
                                   const SentenceEncoding& encoding, const ModelParams& params,
                                   bool keep_detail = false);

BufferStepOutput buffer_step(const Buffer& s_prev, std::span<const double> context,
                             std::span<const double> o_prev, std::span<const double> z,
                             const ModelParams& params);

std::vector<double> output_step(const Buffer& s, std::span<const double> z,
                                const ModelParams& params);

// Runs attention -> update -> output until the mean of the dominant GMM
// component passes l + stop_margin or the frame cap is hit. S_0 is `prime`
// when given, else init_buffer(z); mu_0 and o_0 are zero.
template <typename Real>
BasicSynthesisResult<Real> synthesize(std::span<const PhonemeId> phonemes,
                                      std::span<const std::type_identity_t<Real>> z,
                                      const BasicParams<Real>& params,
                                      const SynthesisConfig& cfg,
                                      const BasicBuffer<Real>* prime = nullptr);

}  // namespace voiceloop
