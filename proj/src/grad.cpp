#include "voiceloop/grad.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "forward.hpp"
#include "voiceloop/errors.hpp"
#include "voiceloop/kernels.hpp"
#include "voiceloop/rng.hpp"

namespace voiceloop {
namespace {

template <typename F>
void zip_tensors(ModelParams& a, const ModelParams& b, F&& f) {
  std::vector<std::span<const double>> rhs;
  b.for_each_tensor([&](const std::string&, std::span<const double> t) { rhs.push_back(t); });
  std::size_t i = 0;
  a.for_each_tensor([&](const std::string&, std::span<double> t) { f(t, rhs[i++]); });
}

struct Tape {
  SentenceEncoding encoding;
  detail::SpeakerProjections<double> speaker;
  std::vector<Buffer> states;  // S_0 .. S_T
  std::vector<detail::AttentionTape<double>> attention;
  std::vector<detail::UpdateTape<double>> update;
  std::vector<detail::MlpTape<double>> output;
  std::vector<std::vector<double>> o_in;
  Matrix<double> outputs;  // T x d_o
  double loss = 0.0;
};

Tape run_forward(const ModelParams& params, std::span<const double> z,
                 std::span<const PhonemeId> phonemes, const FeatureSequence& target,
                 const TeacherForcingConfig& tf, std::uint64_t stream) {
  const HyperParams& h = params.hyper;
  const std::size_t frames = target.length();
  if (frames == 0) throw InvalidInput("target sequence is empty");
  if (target.dim() != h.d_o)
    throw InvalidInput("target has " + std::to_string(target.dim()) +
                       " features per frame, model expects " + std::to_string(h.d_o));

  Tape tape;
  tape.encoding = encode_sentence(phonemes, params);
  tape.speaker = detail::project_speaker(params, z);
  tape.states.reserve(frames + 1);
  tape.states.push_back(init_buffer(z, h));
  tape.attention.resize(frames);
  tape.update.resize(frames);
  tape.output.resize(frames);
  tape.o_in.resize(frames);
  tape.outputs = Matrix<double>(frames, h.d_o);

  Rng rng(derive_seed(tf.seed, stream));
  std::vector<double> mu(h.c, 0.0);
  std::vector<double> o;
  double total = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    try {
      if (t == 0)
        tape.o_in[t].assign(h.d_o, 0.0);
      else
        tape.o_in[t] = teacher_forced_input(tape.outputs.row(t - 1), target.frames.row(t - 1), tf, rng);
      detail::attention_forward(params, tape.encoding.e, tape.states[t].flat(),
                                std::span<const double>(mu), tape.attention[t]);
      detail::update_forward(params, tape.states[t].flat(),
                             std::span<const double>(tape.attention[t].context),
                             std::span<const double>(tape.speaker.update),
                             std::span<const double>(tape.o_in[t]), tape.update[t]);
      tape.states.push_back(tape.states[t]);
      tape.states.back().shift_insert(tape.update[t].u);
      detail::output_forward(params, tape.states[t + 1].flat(),
                             std::span<const double>(tape.speaker.output), tape.output[t], o);
    } catch (const NumericalError& e) {
      throw NumericalError("frame " + std::to_string(t) + ": " + e.what());
    }
    std::copy(o.begin(), o.end(), tape.outputs.row(t).begin());
    mu = tape.attention[t].mu;
    double sq = 0.0;
    for (std::size_t r = 0; r < h.d_o; ++r) {
      const double diff = target.frames(t, r) - o[r];
      sq += diff * diff;
    }
    total += sq / static_cast<double>(h.d_o);
  }
  tape.loss = total / static_cast<double>(frames);
  if (!std::isfinite(tape.loss)) throw NumericalError("sequence loss is not finite");
  return tape;
}

// dx may be empty; grad may be null (speaker-only scope).
void mlp_backward(const Mlp& net, std::span<const double> x, const detail::MlpTape<double>& tape,
                  std::span<const double> dy, Mlp* grad, std::span<double> dx) {
  std::vector<double> dpre(net.hidden_size(), 0.0);
  kernels::accumulate_transposed<double>(net.w2, dy, dpre);
  for (std::size_t i = 0; i < dpre.size(); ++i)
    if (!(tape.pre[i] > 0.0)) dpre[i] = 0.0;
  if (grad) {
    for (std::size_t i = 0; i < dy.size(); ++i) grad->b2[i] += dy[i];
    kernels::accumulate_outer<double>(dy, tape.post, grad->w2);
    for (std::size_t i = 0; i < dpre.size(); ++i) grad->b1[i] += dpre[i];
    kernels::accumulate_outer<double>(dpre, x, grad->w1);
  }
  if (!dx.empty()) kernels::accumulate_transposed<double>(net.w1, dpre, dx);
}

// On entry dmu holds the adjoint of mu_t arriving from later frames; on exit
// it holds the adjoint of mu_{t-1}, which is the same vector since
// mu_t = mu_{t-1} + exp(kappa_t).
void attention_backward(const ModelParams& params, const SentenceEncoding& encoding,
                        std::span<const double> s_prev, const detail::AttentionTape<double>& tape,
                        std::span<const double> dcontext, std::vector<double>& dmu,
                        ModelParams* grads, std::span<double> ds_prev) {
  const std::size_t c = params.hyper.c;
  const std::size_t l = encoding.length();

  std::vector<double> dalpha(l, 0.0);
  kernels::accumulate_transposed<double>(encoding.e, dcontext, dalpha);
  if (grads) {
    for (std::size_t j = 0; j < l; ++j) {
      const PhonemeId p = encoding.phonemes[j];
      for (std::size_t r = 0; r < params.hyper.d_p; ++r)
        grads->lut_p(r, p) += dcontext[r] * tape.alpha[j];
    }
  }

  std::vector<double> draw(3 * c, 0.0);
  std::vector<double> dgamma_prime(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    const double var = tape.sigma_sq[i];
    const double gp = tape.gamma_prime[i];
    double dgp = 0.0, dmean = 0.0, dvar = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      const double dens = tape.density[i * l + j];
      const double a = dalpha[j];
      const double offset = static_cast<double>(j + 1) - tape.mu[i];
      const double phi = gp * dens;
      dgp += a * dens;
      dmean += a * phi * offset / var;
      dvar += a * phi * (offset * offset / (2.0 * var * var) - 0.5 / var);
    }
    dgamma_prime[i] = dgp;
    dmu[i] += dmean;
    draw[i] = dmu[i] * tape.step[i];
    draw[c + i] = dvar * var;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < c; ++i) dot += tape.gamma_prime[i] * dgamma_prime[i];
  for (std::size_t i = 0; i < c; ++i)
    draw[2 * c + i] = tape.gamma_prime[i] * (dgamma_prime[i] - dot);

  mlp_backward(params.attention, s_prev, tape.net, draw, grads ? &grads->attention : nullptr,
               ds_prev);
}

}  // namespace

Gradients& Gradients::operator+=(const Gradients& other) {
  zip_tensors(tensors, other.tensors, [](std::span<double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  });
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += other.dz[i];
  return *this;
}

Gradients& Gradients::operator*=(double scale) {
  tensors.for_each_tensor([&](const std::string&, std::span<double> t) {
    for (double& v : t) v *= scale;
  });
  for (double& v : dz) v *= scale;
  return *this;
}

double Gradients::norm() const {
  double sq = 0.0;
  tensors.for_each_tensor([&](const std::string&, std::span<const double> t) {
    for (double v : t) sq += v * v;
  });
  return std::sqrt(sq);
}

void Gradients::fold_speaker(std::size_t speaker) {
  if (speaker >= tensors.lut_s.cols()) throw InvalidInput("speaker outside the lookup table");
  for (std::size_t r = 0; r < dz.size(); ++r) tensors.lut_s(r, speaker) += dz[r];
}

std::vector<double> teacher_forced_input(std::span<const double> o_prev,
                                         std::span<const double> y_prev,
                                         const TeacherForcingConfig& tf, Rng& rng) {
  if (o_prev.size() != y_prev.size())
    throw InvalidInput("teacher forcing inputs differ in length");
  std::vector<double> out(o_prev.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * (o_prev[i] + y_prev[i]);
    if (tf.noise_std > 0.0) out[i] += tf.noise_std * rng.normal();
  }
  return out;
}

LossAndGradients sequence_loss_and_grads(const ModelParams& params, std::span<const double> z,
                                         std::span<const PhonemeId> phonemes,
                                         const FeatureSequence& target,
                                         const TeacherForcingConfig& tf, std::uint64_t stream,
                                         GradientScope scope) {
  const HyperParams& h = params.hyper;
  const Tape tape = run_forward(params, z, phonemes, target, tf, stream);
  const std::size_t frames = target.length();
  const std::size_t d = h.d();
  const std::size_t kd = h.k * d;

  LossAndGradients result{tape.loss, Gradients(h)};
  ModelParams* grads = scope == GradientScope::kAll ? &result.grads.tensors : nullptr;

  std::vector<double> ds(kd, 0.0);
  std::vector<double> ds_prev(kd, 0.0);
  std::vector<double> dmu(h.c, 0.0);
  std::vector<double> carry(h.d_o, 0.0);
  std::vector<double> dspeaker_update(h.d_p, 0.0);
  std::vector<double> dspeaker_output(h.d_o, 0.0);
  std::vector<double> go(h.d_o);
  std::vector<double> dcontext(h.d_p);
  std::vector<double> do_in(h.d_o);
  std::vector<double> dx(h.update_input());
  const double scale = 2.0 / (static_cast<double>(frames) * static_cast<double>(h.d_o));

  for (std::size_t t = frames; t-- > 0;) {
    for (std::size_t r = 0; r < h.d_o; ++r) {
      go[r] = scale * (tape.outputs(t, r) - target.frames(t, r)) + carry[r];
      dspeaker_output[r] += go[r];
    }
    mlp_backward(params.output, tape.states[t + 1].flat(), tape.output[t], go,
                 grads ? &grads->output : nullptr, ds);

    // S_t = [u_t, S_{t-1}[:, 1..k-1]]
    std::span<const double> du(ds.data(), d);
    std::fill(ds_prev.begin(), ds_prev.end(), 0.0);
    std::copy(ds.begin() + static_cast<std::ptrdiff_t>(d), ds.end(), ds_prev.begin());

    if (h.update == BufferUpdate::kConcat) {
      std::copy(du.begin(), du.begin() + static_cast<std::ptrdiff_t>(h.d_p), dcontext.begin());
      std::copy(du.begin() + static_cast<std::ptrdiff_t>(h.d_p), du.end(), do_in.begin());
    } else {
      std::fill(dx.begin(), dx.end(), 0.0);
      mlp_backward(params.update, tape.update[t].input, tape.update[t].net, du,
                   grads ? &grads->update : nullptr, dx);
      for (std::size_t i = 0; i < kd; ++i) ds_prev[i] += dx[i];
      for (std::size_t r = 0; r < h.d_p; ++r) {
        dcontext[r] = dx[kd + r];
        dspeaker_update[r] += dx[kd + r];
      }
      for (std::size_t r = 0; r < h.d_o; ++r) do_in[r] = dx[kd + h.d_p + r];
    }

    attention_backward(params, tape.encoding, tape.states[t].flat(), tape.attention[t], dcontext,
                       dmu, grads, ds_prev);

    // o_in_t = (o_{t-1} + Y_{t-1}) / 2 + eta for t >= 1; o_in_0 is constant.
    const bool through = t > 0 && !tf.detach_previous_output;
    for (std::size_t r = 0; r < h.d_o; ++r) carry[r] = through ? 0.5 * do_in[r] : 0.0;
    std::swap(ds, ds_prev);
  }

  std::vector<double>& dz = result.grads.dz;
  for (std::size_t j = 0; j < h.k; ++j)
    for (std::size_t r = 0; r < h.d_p; ++r) dz[r] += ds[j * d + r];

  if (grads) kernels::accumulate_outer<double>(dspeaker_output, z, grads->f_o);
  kernels::accumulate_transposed<double>(params.f_o, dspeaker_output, dz);
  if (h.update == BufferUpdate::kNetwork) {
    std::vector<double> dpre(h.d_p);
    for (std::size_t r = 0; r < h.d_p; ++r) {
      const double p = tape.speaker.update[r];
      dpre[r] = dspeaker_update[r] * (1.0 - p * p);
    }
    if (grads) kernels::accumulate_outer<double>(dpre, z, grads->f_u);
    kernels::accumulate_transposed<double>(params.f_u, dpre, dz);
  }
  return result;
}

double sequence_loss(const ModelParams& params, std::span<const double> z,
                     std::span<const PhonemeId> phonemes, const FeatureSequence& target,
                     const TeacherForcingConfig& tf, std::uint64_t stream) {
  return run_forward(params, z, phonemes, target, tf, stream).loss;
}

Matrix<double> teacher_forced_outputs(const ModelParams& params, std::span<const double> z,
                                      std::span<const PhonemeId> phonemes,
                                      const FeatureSequence& target,
                                      const TeacherForcingConfig& tf, std::uint64_t stream) {
  return run_forward(params, z, phonemes, target, tf, stream).outputs;
}

ModelParams generic_params(const HyperParams& hyper, std::uint64_t seed) {
  ModelParams params = init_params(hyper, seed);
  Rng rng(derive_seed(seed, 1));
  for (Mlp* net : {&params.attention, &params.update, &params.output}) {
    const double b2 = 1.0 / std::sqrt(static_cast<double>(net->hidden_size()));
    for (double& v : net->b1) v = rng.uniform(0.0, 1.0);
    for (double& v : net->b2) v = rng.uniform(-b2, b2);
  }
  return params;
}

GradCheckExample near_target_example(const ModelParams& params, std::span<const double> z,
                                     std::size_t length, std::size_t frames,
                                     const TeacherForcingConfig& tf, std::uint64_t seed,
                                     double residual) {
  if (length == 0 || frames == 0) throw InvalidInput("gradient check example needs l, T >= 1");
  Rng rng(seed);
  GradCheckExample ex;
  for (std::size_t j = 0; j < length; ++j) ex.phonemes.push_back(rng.below(params.hyper.n_phonemes));
  ex.stream = rng.next();
  ex.target.frames = Matrix<double>(frames, params.hyper.d_o);
  for (double& v : ex.target.frames.flat()) v = rng.normal();
  const Matrix<double> o = teacher_forced_outputs(params, z, ex.phonemes, ex.target, tf, ex.stream);
  for (std::size_t i = 0; i < o.flat().size(); ++i)
    ex.target.frames.flat()[i] = o.flat()[i] + residual * rng.normal();
  return ex;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double()>& loss, std::span<double> theta,
                          std::size_t index, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("finite-difference step must be positive");
  const double original = theta[index];
  theta[index] = original + eps;
  const double plus = loss();
  theta[index] = original - eps;
  const double minus = loss();
  theta[index] = original;
  if (!std::isfinite(plus) || !std::isfinite(minus))
    throw NumericalError("loss is not finite at a perturbed point");
  return (plus - minus) / (2.0 * eps);
}

TensorCheck check_coordinates(const std::string& name, const std::function<double()>& loss,
                              std::span<double> theta, std::span<const double> analytic,
                              std::span<const std::size_t> coordinates, double eps) {
  TensorCheck check;
  check.name = name;
  for (std::size_t index : coordinates) {
    const double numeric = central_difference(loss, theta, index, eps);
    const double err = relative_error(analytic[index], numeric);
    if (check.checked == 0 || err > check.max_rel_error) {
      check.max_rel_error = err;
      check.argmax = index;
      check.analytic = analytic[index];
      check.numeric = numeric;
    }
    ++check.checked;
  }
  return check;
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& t : tensors) worst = std::max(worst, t.max_rel_error);
  return worst;
}

void GradCheckReport::print(std::ostream& os) const {
  os << std::left << std::setw(14) << "tensor" << std::right << std::setw(8) << "checked"
     << std::setw(14) << "max_rel_err" << std::setw(8) << "argmax" << std::setw(16) << "analytic"
     << std::setw(16) << "numeric" << '\n';
  for (const auto& t : tensors) {
    os << std::left << std::setw(14) << t.name << std::right << std::setw(8) << t.checked
       << std::setw(14) << std::scientific << std::setprecision(3) << t.max_rel_error
       << std::setw(8) << t.argmax << std::setw(16) << std::setprecision(6) << t.analytic
       << std::setw(16) << t.numeric << std::defaultfloat << '\n';
  }
}

void GradCheckReport::write_rows(std::ostream& os) const {
  os << "tensor\tchecked\tmax_rel_error\targmax\tanalytic\tnumeric\n";
  os << std::setprecision(17);
  for (const auto& t : tensors)
    os << t.name << '\t' << t.checked << '\t' << t.max_rel_error << '\t' << t.argmax << '\t'
       << t.analytic << '\t' << t.numeric << '\n';
}

GradCheckReport finite_diff_check(const ModelParams& params, std::span<const double> z,
                                  const GradCheckExample& example, const TeacherForcingConfig& tf,
                                  double eps, std::size_t max_coordinates,
                                  std::uint64_t subsample_seed) {
  if (example.speaker >= params.hyper.n_speakers)
    throw InvalidInput("gradient check speaker outside the lookup table");
  const LossAndGradients analytic = sequence_loss_and_grads(params, z, example.phonemes,
                                                            example.target, tf, example.stream);
  LossAndGradients by_lookup = sequence_loss_and_grads(
      params, params.speaker(example.speaker), example.phonemes, example.target, tf, example.stream);
  by_lookup.grads.fold_speaker(example.speaker);

  ModelParams theta = params;
  std::vector<double> zz(z.begin(), z.end());
  const std::function<double()> loss = [&] {
    return sequence_loss(theta, zz, example.phonemes, example.target, tf, example.stream);
  };
  const std::function<double()> lookup_loss = [&] {
    return sequence_loss(theta, theta.speaker(example.speaker), example.phonemes, example.target,
                         tf, example.stream);
  };

  std::vector<std::string> names;
  std::vector<std::span<double>> values;
  std::vector<std::span<const double>> grads;
  theta.for_each_tensor([&](const std::string& n, std::span<double> t) {
    names.push_back(n);
    values.push_back(t);
  });
  analytic.grads.tensors.for_each_tensor(
      [&](const std::string&, std::span<const double> t) { grads.push_back(t); });
  grads[1] = by_lookup.grads.tensors.lut_s.flat();
  names.push_back("z");
  values.push_back(zz);
  grads.push_back(analytic.grads.dz);

  Rng rng(subsample_seed);
  GradCheckReport report;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::size_t> coords(values[i].size());
    for (std::size_t j = 0; j < coords.size(); ++j) coords[j] = j;
    if (max_coordinates > 0 && coords.size() > max_coordinates) {
      for (std::size_t j = 0; j < max_coordinates; ++j)
        std::swap(coords[j], coords[j + rng.below(coords.size() - j)]);
      coords.resize(max_coordinates);
      std::sort(coords.begin(), coords.end());
    }
    const bool lookup = names[i] == "lut_s";
    report.tensors.push_back(
        check_coordinates(names[i], lookup ? lookup_loss : loss, values[i], grads[i], coords, eps));
  }
  return report;
}

}  // namespace voiceloop
