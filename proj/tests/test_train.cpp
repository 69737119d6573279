#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "voiceloop/corpus.hpp"
#include "voiceloop/errors.hpp"
#include "voiceloop/grad.hpp"
#include "voiceloop/train.hpp"

using namespace voiceloop;
using test::toy_hyper;

namespace {

Utterance toy_utterance(const ModelParams& params, std::size_t speaker, std::size_t frames,
                        std::uint64_t seed, std::string id = "u") {
  Rng rng(seed);
  Utterance u;
  u.id = std::move(id);
  u.speaker = speaker;
  u.phonemes = test::random_phonemes(4, params.hyper.n_phonemes, rng);
  u.features.frames = Matrix<double>(frames, params.hyper.d_o);
  for (double& v : u.features.frames.flat()) v = rng.uniform(-1, 1);
  return u;
}

TrainConfig sgd(double lr, std::size_t epochs = 1) {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.learning_rate = lr;
  cfg.epochs = epochs;
  cfg.jobs = 1;
  return cfg;
}

TeacherForcingConfig quiet() {
  TeacherForcingConfig tf;
  tf.noise_std = 0.0;
  return tf;
}

double max_delta(const ModelParams& a, const ModelParams& b) {
  std::vector<std::span<const double>> ta, tb;
  a.for_each_tensor([&](const std::string&, std::span<const double> t) { ta.push_back(t); });
  b.for_each_tensor([&](const std::string&, std::span<const double> t) { tb.push_back(t); });
  double worst = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) worst = std::max(worst, test::max_abs_diff(ta[i], tb[i]));
  return worst;
}

}  // namespace

TEST_CASE("teacher_forced_input examples") {
  Rng rng(1);
  const TeacherForcingConfig none = quiet();
  const std::vector<double> v{0.5, -1.25, 3.0};
  CHECK(teacher_forced_input(v, v, none, rng) == v);
  CHECK(teacher_forced_input(std::vector<double>{0.0}, std::vector<double>{2.0}, none, rng) ==
        std::vector<double>{1.0});
}

TEST_CASE("teacher forcing noise has the configured spread") {
  TeacherForcingConfig tf;
  tf.noise_std = 2.0;
  Rng rng(derive_seed(3, 0));
  const std::vector<double> o{1.0, -1.0}, y{3.0, 0.0};
  const std::size_t n = 100000;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = teacher_forced_input(o, y, tf, rng);
    for (int c = 0; c < 2; ++c) {
      const double e = x[c] - (o[c] + y[c]) / 2;
      sum[c] += e;
      sq[c] += e * e;
    }
  }
  for (int c = 0; c < 2; ++c) {
    const double mean = sum[c] / n;
    const double sd = std::sqrt(sq[c] / n - mean * mean);
    CHECK(sd >= 1.98);
    CHECK(sd <= 2.02);
  }
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  const auto h = toy_hyper();
  const auto params = init_params(h, 1);
  const std::vector<Utterance> corpus{toy_utterance(params, 0, 5, 1), toy_utterance(params, 2, 4, 2)};
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kMomentum, OptimizerKind::kAdam}) {
    TrainConfig cfg = sgd(0.0, 3);
    cfg.optimizer = kind;
    const auto r = train(params, corpus, cfg, TeacherForcingConfig{});
    CHECK(r.params == params);
    CHECK(r.log.epochs.size() == 3);
  }
}

TEST_CASE("one SGD step moves every parameter by -lr g") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 2);
  const auto utt = toy_utterance(params, 1, 6, 3);
  TeacherForcingConfig tf;
  tf.seed = 5;
  const double lr = 0.01;
  const auto r = train(params, std::vector<Utterance>{utt}, sgd(lr), tf);

  auto g = sequence_loss_and_grads(params, params.speaker(1), utt.phonemes, utt.features, tf, 0).grads;
  g.fold_speaker(1);
  ModelParams expected = params;
  std::vector<std::span<double>> p;
  std::vector<std::span<const double>> gt;
  expected.for_each_tensor([&](const std::string&, std::span<double> t) { p.push_back(t); });
  g.tensors.for_each_tensor([&](const std::string&, std::span<const double> t) { gt.push_back(t); });
  for (std::size_t t = 0; t < p.size(); ++t)
    for (std::size_t i = 0; i < p[t].size(); ++i) p[t][i] -= lr * gt[t][i];
  CHECK(r.params == expected);
  CHECK(r.log.epochs[0].mean_loss ==
        sequence_loss(params, params.speaker(1), utt.phonemes, utt.features, tf, 0));
  CHECK_FALSE(r.params.lut_s.column(1) == params.lut_s.column(1));
  CHECK(r.params.lut_s.column(0) == params.lut_s.column(0));
}

TEST_CASE("a duplicated utterance doubles the batch gradient") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 3);
  auto utt = toy_utterance(params, 0, 5, 4);
  const double lr = 1e-3;
  const auto single = train(params, std::vector<Utterance>{utt}, sgd(lr), quiet());
  TrainConfig batch2 = sgd(lr);
  batch2.batch_size = 2;
  batch2.jobs = 2;
  auto twin = utt;
  twin.id = "twin";
  const auto pair = train(params, std::vector<Utterance>{utt, twin}, batch2, quiet());

  std::vector<std::span<const double>> p0, p1, p2;
  params.for_each_tensor([&](const std::string&, std::span<const double> t) { p0.push_back(t); });
  single.params.for_each_tensor([&](const std::string&, std::span<const double> t) { p1.push_back(t); });
  pair.params.for_each_tensor([&](const std::string&, std::span<const double> t) { p2.push_back(t); });
  double worst = 0;
  for (std::size_t t = 0; t < p0.size(); ++t)
    for (std::size_t i = 0; i < p0[t].size(); ++i) {
      const double d1 = p1[t][i] - p0[t][i], d2 = p2[t][i] - p0[t][i];
      worst = std::max(worst, std::abs(d2 - 2 * d1));
    }
  CHECK(worst < 1e-15);
  CHECK(max_delta(single.params, params) > 0);
}

TEST_CASE("momentum and Adam updates follow their recurrences") {
  const auto h = toy_hyper();
  ModelParams params(h);
  ModelParams grads(h);
  grads.f_o(0, 0) = 2.0;

  TrainConfig m = sgd(0.1);
  m.optimizer = OptimizerKind::kMomentum;
  m.momentum = 0.5;
  Optimizer mo(m, h);
  mo.step(params, grads);
  CHECK(params.f_o(0, 0) == doctest::Approx(-0.2));
  mo.step(params, grads);  // v = 0.5 * 2 + 2 = 3
  CHECK(params.f_o(0, 0) == doctest::Approx(-0.5));
  CHECK(mo.steps() == 2);

  ModelParams q(h);
  TrainConfig a = sgd(0.1);
  a.optimizer = OptimizerKind::kAdam;
  Optimizer adam(a, h);
  adam.step(q, grads);
  // First bias-corrected Adam step is lr * g / (|g| + eps).
  CHECK(q.f_o(0, 0) == doctest::Approx(-0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(q.f_o(0, 1) == 0.0);
}

TEST_CASE("gradient clipping bounds the update") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 4);
  const auto utt = toy_utterance(params, 0, 6, 9);
  TrainConfig cfg = sgd(1.0);
  cfg.clip_norm = 1e-3;
  const auto r = train(params, std::vector<Utterance>{utt}, cfg, quiet());
  double sq = 0;
  std::vector<std::span<const double>> a, b;
  params.for_each_tensor([&](const std::string&, std::span<const double> t) { a.push_back(t); });
  r.params.for_each_tensor([&](const std::string&, std::span<const double> t) { b.push_back(t); });
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) sq += (b[t][i] - a[t][i]) * (b[t][i] - a[t][i]);
  CHECK(std::sqrt(sq) == doctest::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("training is reproducible across thread counts") {
  const auto h = toy_hyper();
  const auto params = init_params(h, 5);
  std::vector<Utterance> corpus;
  for (std::size_t i = 0; i < 7; ++i) corpus.push_back(toy_utterance(params, i % 3, 4 + i, 10 + i, "u" + std::to_string(i)));
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  cfg.seed = 8;
  TeacherForcingConfig tf;
  tf.seed = 2;
  cfg.jobs = 1;
  const auto a = train(params, corpus, cfg, tf);
  cfg.jobs = 4;
  const auto b = train(params, corpus, cfg, tf);
  CHECK(a.params == b.params);
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    CHECK(a.log.epochs[e].mean_loss == b.log.epochs[e].mean_loss);
    CHECK(a.log.epochs[e].param_norm == b.log.epochs[e].param_norm);
    CHECK(a.log.epochs[e].steps == 3 * (e + 1));
  }
  cfg.seed = 9;
  CHECK_FALSE(train(params, corpus, cfg, tf).params == a.params);

  std::ostringstream os;
  a.log.write_tsv(os);
  CHECK(os.str().rfind("epoch\tsteps\tmean_loss\tseconds\tparam_norm\n", 0) == 0);
}

TEST_CASE("resuming from a checkpoint continues the same trajectory") {
  test::TempDir dir("resume");
  const auto h = toy_hyper();
  const auto params = init_params(h, 6);
  const std::vector<Utterance> corpus{toy_utterance(params, 0, 6, 1)};
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 3;
  cfg.jobs = 1;
  const auto straight = train(params, corpus, cfg, quiet());

  cfg.epochs = 2;
  cfg.checkpoint_interval = 1;
  cfg.checkpoint_path = dir / "ckpt.vlo";
  train(params, corpus, cfg, quiet());
  OptimizerSnapshot snap;
  const auto mid = load_checkpoint(cfg.checkpoint_path, &snap);
  CHECK(snap.step == 2);
  CHECK(snap.kind == static_cast<std::uint32_t>(OptimizerKind::kAdam));
  cfg.epochs = 1;
  cfg.checkpoint_interval = 0;
  const auto resumed = train(mid, corpus, cfg, quiet(), {}, &snap);
  CHECK(resumed.params == straight.params);

  TrainConfig other = sgd(1e-2);
  CHECK_THROWS_AS(train(mid, corpus, other, quiet(), {}, &snap), InvalidInput);
}

TEST_CASE("train rejects bad input") {
  const auto h = toy_hyper();
  const auto params = init_params(h, 1);
  CHECK_THROWS_AS(train(params, std::vector<Utterance>{}, sgd(0.1), quiet()), InvalidInput);
  auto bad = toy_utterance(params, 3, 4, 1);
  CHECK_THROWS_AS(train(params, std::vector<Utterance>{bad}, sgd(0.1), quiet()), InvalidInput);
  const std::vector<Utterance> ok{toy_utterance(params, 0, 4, 1)};
  CHECK_THROWS_AS(train(params, ok, sgd(-1.0), quiet()), InvalidInput);
  CHECK_THROWS_AS(train(params, ok, sgd(0.1, 0), quiet()), InvalidInput);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), InvalidInput);
  CHECK(parse_optimizer("momentum") == OptimizerKind::kMomentum);

  ModelParams blown = params;
  for (double& v : blown.output.b2) v = 1e5;
  try {
    train(blown, ok, sgd(0.1), quiet());
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("single-utterance overfit") {
  // Training-scale toy model (the gradient-check dims leave two hidden units
  // per network, too few to fit a whole utterance).
  HyperParams h;
  h.d_p = 16;
  h.d_o = 8;
  h.k = 10;
  h.c = 3;
  h.n_speakers = 2;
  const auto params = init_params(h, 7);
  SyntheticCorpusSpec spec;
  spec.n_speakers = 1;
  spec.n_sentences = 1;
  spec.d_o = h.d_o;
  spec.seed = 3;
  const auto corpus = make_synthetic_corpus(spec).utterances;
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 500;
  cfg.jobs = 1;
  TeacherForcingConfig tf;
  tf.seed = 1;
  const auto r = train(params, corpus, cfg, tf);
  const auto& u = corpus[0];
  const double initial = sequence_loss(params, params.speaker(0), u.phonemes, u.features, tf, 0);
  const double final_loss = sequence_loss(r.params, r.params.speaker(0), u.phonemes, u.features, tf, 0);
  MESSAGE("overfit loss " << initial << " -> " << final_loss);
  CHECK(final_loss < 0.05 * initial);
}

TEST_CASE("speaker fitting freezes the model") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 8);
  const ModelParams copy = params;
  const std::vector<Utterance> samples{toy_utterance(params, 0, 5, 1), toy_utterance(params, 0, 6, 2)};
  TrainConfig cfg = sgd(0.05, 20);
  cfg.seed = 4;
  const auto fit = fit_speaker(params, samples, cfg, quiet());
  CHECK(params == copy);
  CHECK(fit.z.size() == h.d_s());
  CHECK(fit.history.size() == 20);
  CHECK(fit.loss < fit.history.front());
}

TEST_CASE("speaker fitting at the generating embedding stays put") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 9);
  Rng rng(4);
  const auto z_star = test::random_vector(h.d_s(), rng, 0.5);
  std::vector<Utterance> samples;
  for (std::uint64_t s = 0; s < 2; ++s) {
    Utterance u;
    u.id = "self" + std::to_string(s);
    u.phonemes = test::random_phonemes(4, h.n_phonemes, rng);
    SynthesisConfig sc;
    sc.max_frames = 8;
    sc.ignore_stop = true;
    u.features.frames = synthesize<double>(u.phonemes, z_star, params, sc).frames;
    samples.push_back(u);
  }
  const auto fit = fit_speaker(params, samples, sgd(0.1, 25), quiet(), z_star);
  CHECK(fit.loss < 1e-20);
  CHECK(test::max_abs_diff(fit.z, z_star) < 1e-6);
}

TEST_CASE("zero fitting iterations return the initial embedding") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 10);
  const std::vector<Utterance> samples{toy_utterance(params, 0, 5, 1)};
  TrainConfig cfg = sgd(0.1, 0);
  cfg.seed = 12;
  const std::vector<double> init{0.1, -0.2, 0.3, -0.4};
  CHECK(fit_speaker(params, samples, cfg, quiet(), init).z == init);

  const auto drawn = fit_speaker(params, samples, cfg, quiet());
  CHECK(drawn.history.empty());
  CHECK(drawn.z == fit_speaker(params, samples, cfg, quiet()).z);
  for (double v : drawn.z) CHECK(std::abs(v) <= 0.5);

  CHECK_THROWS_AS(fit_speaker(params, std::vector<Utterance>{}, cfg, quiet()), InvalidInput);
  CHECK_THROWS_AS(fit_speaker(params, samples, cfg, quiet(), std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("priming") {
  const auto h = toy_hyper();
  const auto params = generic_params(h, 11);
  const auto z = params.speaker(0);
  CHECK_THROWS_AS(prime_buffer(params, z, std::vector<PhonemeId>{}), InvalidInput);
  const std::vector<PhonemeId> prime{2, 3, 4};
  const auto s = prime_buffer(params, z, prime);
  CHECK(s == synthesize<double>(prime, z, params, SynthesisConfig{}).final_buffer);
}
