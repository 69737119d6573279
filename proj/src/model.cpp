#include "voiceloop/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "forward.hpp"
#include "voiceloop/errors.hpp"
#include "voiceloop/rng.hpp"

namespace voiceloop {

void HyperParams::validate() const {
  auto require = [](std::size_t v, const char* name) {
    if (v == 0) throw InvalidInput(std::string("hyperparameter ") + name + " must be >= 1");
  };
  require(d_p, "d_p");
  require(d_o, "d_o");
  require(k, "k");
  require(c, "c");
  require(n_phonemes, "n_phonemes");
  require(n_speakers, "n_speakers");
  require(hidden_divisor, "hidden_divisor");
  if (update != BufferUpdate::kNetwork && update != BufferUpdate::kConcat)
    throw InvalidInput("unknown buffer update mode");
}

template <typename Real>
BasicParams<Real>::BasicParams(const HyperParams& h)
    : hyper(h),
      lut_p(h.d_p, h.n_phonemes),
      lut_s(h.d_s(), h.n_speakers),
      f_u(h.d_p, h.d_s()),
      f_o(h.d_o, h.d_s()),
      attention(h.attention_input(), h.hidden_size(h.attention_input()), 3 * h.c),
      update(h.update_input(), h.hidden_size(h.update_input()), h.d()),
      output(h.output_input(), h.hidden_size(h.output_input()), h.d_o) {
  h.validate();
}

template <typename Real>
std::vector<Real> BasicParams<Real>::speaker(std::size_t id) const {
  if (id >= lut_s.cols())
    throw InvalidInput("speaker id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(lut_s.cols()) + ")");
  return lut_s.column(id);
}

template struct BasicParams<float>;
template struct BasicParams<double>;

ModelParams init_params(const HyperParams& hyper, std::uint64_t seed) {
  ModelParams params(hyper);
  Rng rng(seed);
  auto fill = [&rng](std::span<double> values, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : values) v = rng.uniform(-bound, bound);
  };
  fill(params.lut_p.flat(), hyper.d_p);
  fill(params.lut_s.flat(), hyper.d_s());
  fill(params.f_u.flat(), hyper.d_s());
  fill(params.f_o.flat(), hyper.d_s());
  for (Mlp* net : {&params.attention, &params.update, &params.output}) {
    fill(net->w1.flat(), net->input_size());
    fill(net->w2.flat(), net->hidden_size());
  }
  return params;
}

std::size_t parameter_count(const HyperParams& hyper) {
  hyper.validate();
  auto mlp = [&](std::size_t in, std::size_t out) {
    const std::size_t h = hyper.hidden_size(in);
    return in * h + h + h * out + out;
  };
  return hyper.d_p * hyper.n_phonemes + hyper.d_s() * hyper.n_speakers +
         hyper.d_p * hyper.d_s() + hyper.d_o * hyper.d_s() +
         mlp(hyper.attention_input(), 3 * hyper.c) + mlp(hyper.update_input(), hyper.d()) +
         mlp(hyper.output_input(), hyper.d_o);
}

template <typename To, typename From>
BasicParams<To> cast_params(const BasicParams<From>& params) {
  BasicParams<To> out(params.hyper);
  std::vector<std::span<const From>> sources;
  params.for_each_tensor([&](const std::string&, std::span<const From> t) { sources.push_back(t); });
  std::size_t i = 0;
  out.for_each_tensor([&](const std::string&, std::span<To> t) {
    std::transform(sources[i].begin(), sources[i].end(), t.begin(),
                   [](From v) { return static_cast<To>(v); });
    ++i;
  });
  return out;
}

template BasicParams<float> cast_params<float, double>(const BasicParams<double>&);
template BasicParams<double> cast_params<double, float>(const BasicParams<float>&);
template BasicParams<double> cast_params<double, double>(const BasicParams<double>&);

template <typename Real>
void BasicBuffer<Real>::shift_insert(std::span<const Real> u) {
  if (u.size() != d_)
    throw InvalidInput("buffer column has " + std::to_string(u.size()) + " entries, expected " +
                       std::to_string(d_));
  std::copy_backward(data_.begin(), data_.end() - static_cast<std::ptrdiff_t>(d_), data_.end());
  std::copy(u.begin(), u.end(), data_.begin());
}

template class BasicBuffer<float>;
template class BasicBuffer<double>;

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kAttentionPassedEnd:
      return "attention_passed_end";
    case StopReason::kMaxFrames:
      return "max_frames";
  }
  return "unknown";
}

template <typename Real>
BasicSentenceEncoding<Real> encode_sentence(std::span<const PhonemeId> phonemes,
                                            const BasicParams<Real>& params) {
  if (phonemes.empty()) throw InvalidInput("phoneme sequence is empty");
  const std::size_t n = params.hyper.n_phonemes;
  BasicSentenceEncoding<Real> enc;
  enc.phonemes.assign(phonemes.begin(), phonemes.end());
  enc.e = Matrix<Real>(params.hyper.d_p, phonemes.size());
  for (std::size_t j = 0; j < phonemes.size(); ++j) {
    if (phonemes[j] >= n)
      throw InvalidInput("phoneme id " + std::to_string(phonemes[j]) + " at index " +
                         std::to_string(j) + " outside [0, " + std::to_string(n) + ")");
    for (std::size_t r = 0; r < params.hyper.d_p; ++r) enc.e(r, j) = params.lut_p(r, phonemes[j]);
  }
  return enc;
}

template BasicSentenceEncoding<float> encode_sentence(std::span<const PhonemeId>,
                                                      const BasicParams<float>&);
template BasicSentenceEncoding<double> encode_sentence(std::span<const PhonemeId>,
                                                       const BasicParams<double>&);

template <typename Real>
BasicBuffer<Real> init_buffer(std::span<const Real> z, const HyperParams& hyper) {
  if (z.size() != hyper.d_s())
    throw InvalidInput("speaker embedding has " + std::to_string(z.size()) + " entries, expected " +
                       std::to_string(hyper.d_s()));
  BasicBuffer<Real> s(hyper.d(), hyper.k);
  for (std::size_t j = 0; j < hyper.k; ++j)
    for (std::size_t r = 0; r < hyper.d_p; ++r) s(r, j) = z[r];
  return s;
}

template BasicBuffer<float> init_buffer(std::span<const float>, const HyperParams&);
template BasicBuffer<double> init_buffer(std::span<const double>, const HyperParams&);

namespace {

void check_buffer(const Buffer& s, const HyperParams& h) {
  if (s.rows() != h.d() || s.cols() != h.k)
    throw InvalidInput("buffer shape " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                       " does not match d x k = " + std::to_string(h.d()) + "x" +
                       std::to_string(h.k));
}

}  // namespace

AttentionStepOutput attention_step(const Buffer& s_prev, std::span<const double> mu_prev,
                                   const SentenceEncoding& encoding, const ModelParams& params,
                                   bool keep_detail) {
  const HyperParams& h = params.hyper;
  check_buffer(s_prev, h);
  if (mu_prev.size() != h.c) throw InvalidInput("attention means must have c entries");
  if (encoding.e.rows() != h.d_p || encoding.e.cols() == 0)
    throw InvalidInput("sentence encoding must be d_p x l with l >= 1");

  detail::AttentionTape<double> tape;
  detail::attention_forward(params, encoding.e, s_prev.flat(), mu_prev, tape);

  AttentionStepOutput out;
  out.alpha = tape.alpha;
  out.context = tape.context;
  out.mu = tape.mu;
  if (keep_detail) {
    const std::size_t l = encoding.e.cols();
    AttentionDetail d{tape.gamma_prime, tape.sigma_sq, Matrix<double>(h.c, l)};
    for (std::size_t i = 0; i < h.c; ++i)
      for (std::size_t j = 0; j < l; ++j) d.phi(i, j) = tape.gamma_prime[i] * tape.density[i * l + j];
    out.detail = std::move(d);
  }
  return out;
}

BufferStepOutput buffer_step(const Buffer& s_prev, std::span<const double> context,
                             std::span<const double> o_prev, std::span<const double> z,
                             const ModelParams& params) {
  const HyperParams& h = params.hyper;
  check_buffer(s_prev, h);
  if (context.size() != h.d_p) throw InvalidInput("context must have d_p entries");
  if (o_prev.size() != h.d_o) throw InvalidInput("previous output must have d_o entries");
  const auto speaker = detail::project_speaker(params, z);
  detail::UpdateTape<double> tape;
  detail::update_forward(params, s_prev.flat(), context, std::span<const double>(speaker.update),
                         o_prev, tape);
  BufferStepOutput out{tape.u, s_prev};
  out.buffer.shift_insert(tape.u);
  return out;
}

std::vector<double> output_step(const Buffer& s, std::span<const double> z,
                                const ModelParams& params) {
  check_buffer(s, params.hyper);
  const auto speaker = detail::project_speaker(params, z);
  detail::MlpTape<double> tape;
  std::vector<double> o;
  detail::output_forward(params, s.flat(), std::span<const double>(speaker.output), tape, o);
  return o;
}

template <typename Real>
BasicSynthesisResult<Real> synthesize(std::span<const PhonemeId> phonemes,
                                      std::span<const std::type_identity_t<Real>> z,
                                      const BasicParams<Real>& params,
                                      const SynthesisConfig& cfg, const BasicBuffer<Real>* prime) {
  const HyperParams& h = params.hyper;
  const auto encoding = encode_sentence(phonemes, params);
  const std::size_t l = encoding.length();
  const std::size_t cap = cfg.frame_cap(l);
  if (cap == 0) throw InvalidInput("max_frames must be >= 1");
  const auto speaker = detail::project_speaker(params, z);

  BasicBuffer<Real> s = prime ? *prime : init_buffer(z, h);
  if (s.rows() != h.d() || s.cols() != h.k) throw InvalidInput("prime buffer has the wrong shape");

  std::vector<Real> mu(h.c, Real(0));
  std::vector<Real> o_prev(h.d_o, Real(0));
  std::vector<Real> o;
  detail::AttentionTape<Real> attention;
  detail::UpdateTape<Real> update;
  detail::MlpTape<Real> output;

  std::vector<Real> frames, alphas, mus;
  frames.reserve(cap * h.d_o);
  BasicSynthesisResult<Real> result;
  result.stop_reason = StopReason::kMaxFrames;
  std::size_t t = 0;
  for (; t < cap; ++t) {
    try {
      detail::attention_forward(params, encoding.e, s.flat(), std::span<const Real>(mu), attention);
      detail::update_forward(params, s.flat(), std::span<const Real>(attention.context),
                             std::span<const Real>(speaker.update), std::span<const Real>(o_prev),
                             update);
      s.shift_insert(update.u);
      detail::output_forward(params, s.flat(), std::span<const Real>(speaker.output), output, o);
    } catch (const NumericalError& e) {
      throw NumericalError("frame " + std::to_string(t) + ": " + e.what());
    }
    frames.insert(frames.end(), o.begin(), o.end());
    alphas.insert(alphas.end(), attention.alpha.begin(), attention.alpha.end());
    mus.insert(mus.end(), attention.mu.begin(), attention.mu.end());
    mu = attention.mu;
    o_prev = o;

    if (!cfg.ignore_stop) {
      const auto& gp = attention.gamma_prime;
      const std::size_t dominant =
          static_cast<std::size_t>(std::max_element(gp.begin(), gp.end()) - gp.begin());
      if (mu[dominant] > static_cast<Real>(static_cast<double>(l) + cfg.stop_margin)) {
        result.stop_reason = StopReason::kAttentionPassedEnd;
        ++t;
        break;
      }
    }
  }

  result.frames = Matrix<Real>(t, h.d_o);
  std::copy(frames.begin(), frames.end(), result.frames.data());
  result.trace.alpha = Matrix<Real>(t, l);
  std::copy(alphas.begin(), alphas.end(), result.trace.alpha.data());
  result.trace.mu = Matrix<Real>(t, h.c);
  std::copy(mus.begin(), mus.end(), result.trace.mu.data());
  result.final_buffer = std::move(s);
  return result;
}

template BasicSynthesisResult<float> synthesize(std::span<const PhonemeId>, std::span<const float>,
                                                const BasicParams<float>&, const SynthesisConfig&,
                                                const BasicBuffer<float>*);
template BasicSynthesisResult<double> synthesize(std::span<const PhonemeId>,
                                                 std::span<const double>,
                                                 const BasicParams<double>&,
                                                 const SynthesisConfig&,
                                                 const BasicBuffer<double>*);

}  // namespace voiceloop
