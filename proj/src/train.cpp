#include "voiceloop/train.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>

#include "voiceloop/errors.hpp"
#include "voiceloop/kernels.hpp"
#include "voiceloop/rng.hpp"

namespace voiceloop {
namespace {

constexpr double kDivergenceLimit = 1e6;

std::vector<std::span<double>> mutable_tensors(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.for_each_tensor([&](const std::string&, std::span<double> t) { out.push_back(t); });
  return out;
}

std::vector<std::span<const double>> tensors(const ModelParams& p) {
  std::vector<std::span<const double>> out;
  p.for_each_tensor([&](const std::string&, std::span<const double> t) { out.push_back(t); });
  return out;
}

double param_norm(const ModelParams& p) {
  double sq = 0.0;
  for (auto t : tensors(p))
    for (double v : t) sq += v * v;
  return std::sqrt(sq);
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

int worker_count(const TrainConfig& cfg) {
  return cfg.jobs > 0 ? cfg.jobs : kernels::max_threads();
}

// Per-utterance losses and gradients for one batch, computed concurrently.
// Results are indexed by batch position so the caller can sum in order.
std::vector<LossAndGradients> batch_gradients(const ModelParams& params,
                                              std::span<const Utterance> corpus,
                                              std::span<const std::size_t> batch,
                                              std::span<const std::vector<double>> speakers,
                                              const TeacherForcingConfig& tf,
                                              std::uint64_t stream_base, GradientScope scope,
                                              int workers) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<std::optional<LossAndGradients>> slots(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (n > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Utterance& utt = corpus[batch[i]];
    try {
      slots[i] = sequence_loss_and_grads(params, speakers[i], utt.phonemes, utt.features, tf,
                                         stream_base + batch[i], scope);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!errors[i]) continue;
    const std::string where = "utterance " + corpus[batch[i]].id + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + e.what());
    }
  }
  std::vector<LossAndGradients> out;
  out.reserve(batch.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kMomentum:
      return "momentum";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw InvalidInput("unknown optimizer '" + name + "' (expected sgd, momentum or adam)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidInput("learning rate must be finite and >= 0");
  if (epochs == 0) throw InvalidInput("epochs must be >= 1");
  if (batch_size == 0) throw InvalidInput("batch size must be >= 1");
  if (clip_norm < 0.0) throw InvalidInput("clip norm must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidInput("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidInput("Adam epsilon must be > 0");
  if (momentum < 0.0) throw InvalidInput("momentum must be >= 0");
}

void TrainLog::write_tsv(std::ostream& os) const {
  os << "epoch\tsteps\tmean_loss\tseconds\tparam_norm\n";
  for (const auto& e : epochs)
    os << e.epoch << '\t' << e.steps << '\t' << std::setprecision(10) << e.mean_loss << '\t'
       << std::setprecision(4) << e.seconds << '\t' << std::setprecision(10) << e.param_norm
       << '\n';
}

Optimizer::Optimizer(const TrainConfig& cfg, const HyperParams& hyper) : cfg_(cfg) {
  const std::size_t n_slots = cfg.optimizer == OptimizerKind::kAdam       ? 2
                              : cfg.optimizer == OptimizerKind::kMomentum ? 1
                                                                          : 0;
  for (std::size_t i = 0; i < n_slots; ++i) slots_.emplace_back(hyper);
}

void Optimizer::step(ModelParams& params, const ModelParams& grads) {
  ++step_;
  auto p = mutable_tensors(params);
  const auto g = tensors(grads);
  const double lr = cfg_.learning_rate;
  switch (cfg_.optimizer) {
    case OptimizerKind::kSgd:
      for (std::size_t t = 0; t < p.size(); ++t)
        for (std::size_t i = 0; i < p[t].size(); ++i) p[t][i] -= lr * g[t][i];
      break;
    case OptimizerKind::kMomentum: {
      auto v = mutable_tensors(slots_[0]);
      for (std::size_t t = 0; t < p.size(); ++t)
        for (std::size_t i = 0; i < p[t].size(); ++i) {
          v[t][i] = cfg_.momentum * v[t][i] + g[t][i];
          p[t][i] -= lr * v[t][i];
        }
      break;
    }
    case OptimizerKind::kAdam: {
      auto m = mutable_tensors(slots_[0]);
      auto v = mutable_tensors(slots_[1]);
      const double b1 = cfg_.beta1, b2 = cfg_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
      for (std::size_t t = 0; t < p.size(); ++t)
        for (std::size_t i = 0; i < p[t].size(); ++i) {
          const double gi = g[t][i];
          m[t][i] = b1 * m[t][i] + (1.0 - b1) * gi;
          v[t][i] = b2 * v[t][i] + (1.0 - b2) * gi * gi;
          p[t][i] -= lr * (m[t][i] / c1) / (std::sqrt(v[t][i] / c2) + cfg_.epsilon);
        }
      break;
    }
  }
}

OptimizerSnapshot Optimizer::snapshot() const {
  return {static_cast<std::uint32_t>(cfg_.optimizer), step_, slots_};
}

void Optimizer::restore(const OptimizerSnapshot& snap) {
  if (snap.kind != static_cast<std::uint32_t>(cfg_.optimizer) || snap.slots.size() != slots_.size())
    throw InvalidInput("checkpoint optimizer state does not match the configured optimizer");
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!(snap.slots[i].hyper == slots_[i].hyper))
      throw InvalidInput("checkpoint optimizer state has the wrong shape");
    slots_[i] = snap.slots[i];
  }
  step_ = snap.step;
}

TrainResult train(ModelParams params, std::span<const Utterance> corpus, const TrainConfig& cfg,
                  const TeacherForcingConfig& tf, const EpochCallback& on_epoch,
                  const OptimizerSnapshot* resume) {
  cfg.validate();
  const HyperParams& h = params.hyper;
  if (corpus.empty()) throw InvalidInput("training corpus is empty");
  for (const auto& utt : corpus) {
    if (utt.speaker >= h.n_speakers)
      throw InvalidInput("utterance " + utt.id + " has speaker " + std::to_string(utt.speaker) +
                         " but the model has " + std::to_string(h.n_speakers) + " speakers");
    if (utt.features.dim() != h.d_o)
      throw InvalidInput("utterance " + utt.id + " has feature dimension " +
                         std::to_string(utt.features.dim()));
  }

  Optimizer optimizer(cfg, h);
  if (resume) optimizer.restore(*resume);
  const int workers = worker_count(cfg);
  const std::size_t n = corpus.size();
  TrainLog log;
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(cfg.seed, epoch));
    shuffle(order, shuffler);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + begin, end - begin);
      std::vector<std::vector<double>> speakers;
      for (std::size_t idx : batch) speakers.push_back(params.speaker(corpus[idx].speaker));

      auto results = batch_gradients(params, corpus, batch, speakers, tf,
                                     static_cast<std::uint64_t>(epoch) * n, GradientScope::kAll,
                                     workers);
      Gradients total(h);
      for (std::size_t i = 0; i < results.size(); ++i) {
        const double loss = results[i].loss;
        if (!(loss <= kDivergenceLimit))
          throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                               ", utterance " + corpus[batch[i]].id + " (loss " +
                               std::to_string(loss) + ")");
        loss_sum += loss;
        results[i].grads.fold_speaker(corpus[batch[i]].speaker);
        total += results[i].grads;
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = total.norm();
        if (norm > cfg.clip_norm) total *= cfg.clip_norm / norm;
      }
      optimizer.step(params, total.tensors);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.steps = optimizer.steps();
    stats.mean_loss = loss_sum / static_cast<double>(n);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    stats.param_norm = param_norm(params);
    log.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_path.empty() &&
        (epoch + 1) % cfg.checkpoint_interval == 0)
      save_checkpoint(params, optimizer.snapshot(), cfg.checkpoint_path);
  }
  return {std::move(params), std::move(log)};
}

FitResult fit_speaker(const ModelParams& params, std::span<const Utterance> samples,
                      const TrainConfig& cfg, const TeacherForcingConfig& tf,
                      std::optional<std::vector<double>> initial_z) {
  const HyperParams& h = params.hyper;
  if (samples.empty()) throw InvalidInput("speaker fitting needs at least one sample");
  if (cfg.batch_size == 0) throw InvalidInput("batch size must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw InvalidInput("learning rate must be >= 0");

  FitResult fit;
  if (initial_z) {
    if (initial_z->size() != h.d_s()) throw InvalidInput("initial z has the wrong dimension");
    fit.z = std::move(*initial_z);
  } else {
    Rng rng(cfg.seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(h.d_s()));
    fit.z.resize(h.d_s());
    for (double& v : fit.z) v = rng.uniform(-bound, bound);
  }

  const int workers = worker_count(cfg);
  const std::size_t n = samples.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  auto pass = [&](std::uint64_t stream_base, bool update) {
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::span<const std::size_t> batch(all.data() + begin, end - begin);
      const std::vector<std::vector<double>> speakers(batch.size(), fit.z);
      auto results = batch_gradients(params, samples, batch, speakers, tf, stream_base,
                                     GradientScope::kSpeakerOnly, workers);
      std::vector<double> dz(h.d_s(), 0.0);
      for (const auto& r : results) {
        if (!(r.loss <= kDivergenceLimit)) throw NumericalError("speaker fitting diverged");
        loss_sum += r.loss;
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += r.grads.dz[i];
      }
      if (update)
        for (std::size_t i = 0; i < dz.size(); ++i) fit.z[i] -= cfg.learning_rate * dz[i];
    }
    return loss_sum / static_cast<double>(n);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch)
    fit.history.push_back(pass(static_cast<std::uint64_t>(epoch) * n, true));
  fit.loss = pass(static_cast<std::uint64_t>(cfg.epochs) * n, false);
  return fit;
}

Buffer prime_buffer(const ModelParams& params, std::span<const double> z,
                    std::span<const PhonemeId> prime_phonemes, const SynthesisConfig& cfg) {
  if (prime_phonemes.empty()) throw InvalidInput("priming sequence is empty");
  return synthesize<double>(prime_phonemes, z, params, cfg).final_buffer;
}

}  // namespace voiceloop
