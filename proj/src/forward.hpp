#pragma once

// Per-frame forward pieces shared by synthesis and the training tape.
// Intermediate values live in tape structs: synthesis reuses one set per
// sequence, training keeps one per frame for the backward pass.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "voiceloop/errors.hpp"
#include "voiceloop/kernels.hpp"
#include "voiceloop/model.hpp"

namespace voiceloop::detail {

// Spans of const Real that do not take part in template deduction, so
// callers can pass mutable spans and vectors.
template <typename Real>
using NoDeduce = std::span<const std::type_identity_t<Real>>;

template <typename Real>
bool all_finite(std::span<const Real> v) {
  for (Real x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

template <typename Real>
struct MlpTape {
  std::vector<Real> pre;   // W1 x + b1
  std::vector<Real> post;  // relu(pre)
  std::vector<Real> out;

  void resize(const BasicMlp<Real>& net) {
    pre.resize(net.hidden_size());
    post.resize(net.hidden_size());
    out.resize(net.output_size());
  }
};

template <typename Real>
void mlp_forward(const BasicMlp<Real>& net, NoDeduce<Real> x, MlpTape<Real>& tape) {
  tape.resize(net);
  kernels::affine<Real>(net.w1, x, net.b1, tape.pre);
  for (std::size_t i = 0; i < tape.pre.size(); ++i)
    tape.post[i] = tape.pre[i] > Real(0) ? tape.pre[i] : Real(0);
  kernels::affine<Real>(net.w2, tape.post, net.b2, tape.out);
}

template <typename Real>
struct AttentionTape {
  MlpTape<Real> net;             // out = [kappa, beta, gamma]
  std::vector<Real> step;        // exp(kappa)
  std::vector<Real> gamma_prime;
  std::vector<Real> sigma_sq;
  std::vector<Real> mu;          // mu_t
  std::vector<Real> density;     // c x l, N(j; mu_i, sigma_i^2)
  std::vector<Real> alpha;       // l
  std::vector<Real> context;     // d_p
};

template <typename Real>
void attention_forward(const BasicParams<Real>& params, const Matrix<Real>& encoding,
                       NoDeduce<Real> s_prev, NoDeduce<Real> mu_prev,
                       AttentionTape<Real>& tape) {
  const std::size_t c = params.hyper.c;
  const std::size_t l = encoding.cols();
  mlp_forward(params.attention, s_prev, tape.net);
  if (!all_finite<Real>(tape.net.out)) throw NumericalError("attention network output is not finite");

  tape.step.resize(c);
  tape.gamma_prime.resize(c);
  tape.sigma_sq.resize(c);
  tape.mu.resize(c);
  tape.density.resize(c * l);
  tape.alpha.assign(l, Real(0));
  tape.context.resize(encoding.rows());

  const Real* kappa = tape.net.out.data();
  const Real* beta = kappa + c;
  const Real* gamma = kappa + 2 * c;

  Real top = gamma[0];
  for (std::size_t i = 1; i < c; ++i) top = std::max(top, gamma[i]);
  Real total = 0;
  for (std::size_t i = 0; i < c; ++i) {
    tape.gamma_prime[i] = std::exp(gamma[i] - top);
    total += tape.gamma_prime[i];
  }
  for (std::size_t i = 0; i < c; ++i) tape.gamma_prime[i] /= total;

  const Real two_pi = Real(2) * std::numbers::pi_v<Real>;
  for (std::size_t i = 0; i < c; ++i) {
    tape.step[i] = std::exp(kappa[i]);
    tape.mu[i] = mu_prev[i] + tape.step[i];
    tape.sigma_sq[i] = std::exp(beta[i]);
    const Real var = tape.sigma_sq[i];
    if (!std::isfinite(tape.mu[i]) || !(var > Real(0)) || !std::isfinite(var))
      throw NumericalError("attention mixture parameters out of range");
    const Real norm = Real(1) / std::sqrt(two_pi * var);
    for (std::size_t j = 0; j < l; ++j) {
      const Real offset = Real(j + 1) - tape.mu[i];
      const Real dens = norm * std::exp(-offset * offset / (Real(2) * var));
      tape.density[i * l + j] = dens;
      tape.alpha[j] += tape.gamma_prime[i] * dens;
    }
  }
  kernels::affine<Real>(encoding, tape.alpha, {}, tape.context);
}

template <typename Real>
struct UpdateTape {
  std::vector<Real> input;  // [flat S_{t-1}, context + speaker, o_in]
  MlpTape<Real> net;
  std::vector<Real> u;
};

// `speaker` is tanh(F_u z), constant over a sequence.
template <typename Real>
void update_forward(const BasicParams<Real>& params, NoDeduce<Real> s_prev,
                    NoDeduce<Real> context, NoDeduce<Real> speaker,
                    NoDeduce<Real> o_in, UpdateTape<Real>& tape) {
  const HyperParams& h = params.hyper;
  if (h.update == BufferUpdate::kConcat) {
    tape.u.resize(h.d());
    std::copy(context.begin(), context.end(), tape.u.begin());
    std::copy(o_in.begin(), o_in.end(), tape.u.begin() + static_cast<std::ptrdiff_t>(h.d_p));
  } else {
    tape.input.resize(h.update_input());
    auto it = std::copy(s_prev.begin(), s_prev.end(), tape.input.begin());
    for (std::size_t r = 0; r < h.d_p; ++r) *it++ = context[r] + speaker[r];
    std::copy(o_in.begin(), o_in.end(), it);
    mlp_forward(params.update, std::span<const Real>(tape.input), tape.net);
    tape.u = tape.net.out;
  }
  if (!all_finite<Real>(tape.u)) throw NumericalError("buffer update is not finite");
}

// `speaker` is F_o z.
template <typename Real>
void output_forward(const BasicParams<Real>& params, NoDeduce<Real> s,
                    NoDeduce<Real> speaker, MlpTape<Real>& tape, std::vector<Real>& o) {
  mlp_forward(params.output, s, tape);
  o.resize(tape.out.size());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = tape.out[i] + speaker[i];
  if (!all_finite<Real>(o)) throw NumericalError("output is not finite");
}

template <typename Real>
struct SpeakerProjections {
  std::vector<Real> update;  // tanh(F_u z)
  std::vector<Real> output;  // F_o z
};

template <typename Real>
SpeakerProjections<Real> project_speaker(const BasicParams<Real>& params, NoDeduce<Real> z) {
  if (z.size() != params.hyper.d_s())
    throw InvalidInput("speaker embedding has " + std::to_string(z.size()) + " entries, expected " +
                       std::to_string(params.hyper.d_s()));
  SpeakerProjections<Real> p;
  p.update.resize(params.hyper.d_p);
  p.output.resize(params.hyper.d_o);
  kernels::affine<Real>(params.f_u, z, {}, p.update);
  for (Real& x : p.update) x = std::tanh(x);
  kernels::affine<Real>(params.f_o, z, {}, p.output);
  return p;
}

}  // namespace voiceloop::detail
