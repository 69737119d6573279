#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "voiceloop/corpus.hpp"
#include "voiceloop/errors.hpp"
#include "voiceloop/rng.hpp"

namespace voiceloop {
namespace {

std::string utterance_id(std::size_t speaker, std::size_t sentence) {
  std::ostringstream id;
  id << "s" << std::setw(2) << std::setfill('0') << speaker << "_u" << std::setw(3) << sentence;
  return id.str();
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  if (n_speakers == 0 || n_sentences == 0) throw InvalidInput("corpus needs speakers and sentences");
  if (min_phonemes == 0 || min_phonemes > max_phonemes)
    throw InvalidInput("phoneme count range must satisfy 1 <= min <= max");
  if (min_frames == 0 || min_frames > max_frames)
    throw InvalidInput("frame count range must satisfy 1 <= min <= max");
  if (d_o == 0) throw InvalidInput("d_o must be >= 1");
  if (n_phonemes < 3) throw InvalidInput("inventory needs at least one non-pause phoneme");
  if (!(duration_min > 0.0) || duration_min > duration_max)
    throw InvalidInput("duration range must satisfy 0 < min <= max");
  if (!duration_multipliers.empty() && duration_multipliers.size() != n_speakers)
    throw InvalidInput("duration_multipliers needs one entry per speaker");
  for (double m : duration_multipliers)
    if (!(m > 0.0)) throw InvalidInput("duration multipliers must be positive");
  if (noise_std < 0.0 || template_scale < 0.0 || offset_scale < 0.0)
    throw InvalidInput("scales must be nonnegative");
}

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCorpus corpus;
  SyntheticTruth& truth = corpus.truth;

  truth.templates = Matrix<double>(spec.n_phonemes, spec.d_o);
  for (double& v : truth.templates.flat()) v = rng.uniform(-spec.template_scale, spec.template_scale);
  truth.offsets = Matrix<double>(spec.n_speakers, spec.d_o);
  for (double& v : truth.offsets.flat()) v = rng.uniform(-spec.offset_scale, spec.offset_scale);
  truth.duration_multipliers = spec.duration_multipliers;
  if (truth.duration_multipliers.empty())
    for (std::size_t s = 0; s < spec.n_speakers; ++s)
      truth.duration_multipliers.push_back(rng.uniform(spec.duration_min, spec.duration_max));

  // Sentences draw from the non-pause phonemes.
  const std::size_t speech_phonemes = spec.n_phonemes - 2;
  std::vector<std::vector<std::size_t>> base_frames(spec.n_sentences);
  for (std::size_t i = 0; i < spec.n_sentences; ++i) {
    const std::size_t len = spec.min_phonemes + rng.below(spec.max_phonemes - spec.min_phonemes + 1);
    std::vector<PhonemeId> ids(len);
    for (auto& id : ids) id = rng.below(speech_phonemes);
    for (std::size_t j = 0; j < len; ++j)
      base_frames[i].push_back(spec.min_frames + rng.below(spec.max_frames - spec.min_frames + 1));
    truth.sentences.push_back(std::move(ids));
  }

  for (std::size_t s = 0; s < spec.n_speakers; ++s) {
    for (std::size_t i = 0; i < spec.n_sentences; ++i) {
      const auto& ids = truth.sentences[i];
      std::vector<std::size_t> durations;
      std::size_t total = 0;
      for (std::size_t base : base_frames[i]) {
        const double scaled = std::round(static_cast<double>(base) * truth.duration_multipliers[s]);
        durations.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(scaled)));
        total += durations.back();
      }
      Utterance utt;
      utt.id = utterance_id(s, i);
      utt.speaker = s;
      utt.phonemes = ids;
      utt.features.frame_shift_ms = spec.frame_shift_ms;
      utt.features.frames = Matrix<double>(total, spec.d_o);
      Rng noise(derive_seed(spec.seed, 1 + s * spec.n_sentences + i));
      std::size_t t = 0;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        const auto from = truth.templates.row(ids[j]);
        const bool last = j + 1 == ids.size();
        const auto to = truth.templates.row(last ? ids[j] : ids[j + 1]);
        for (std::size_t f = 0; f < durations[j]; ++f, ++t) {
          const double w = static_cast<double>(f) / static_cast<double>(durations[j]);
          for (std::size_t r = 0; r < spec.d_o; ++r) {
            double v = from[r] + w * (to[r] - from[r]) + truth.offsets(s, r);
            if (spec.noise_std > 0.0) v += spec.noise_std * noise.normal();
            utt.features.frames(t, r) = v;
          }
        }
      }
      corpus.utterances.push_back(std::move(utt));
    }
  }
  return corpus;
}

CorpusManifest generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                         const std::filesystem::path& dir) {
  const SyntheticCorpus corpus = make_synthetic_corpus(spec);
  std::filesystem::create_directories(dir / "features");
  CorpusManifest manifest;
  for (const auto& utt : corpus.utterances) {
    const auto path = dir / "features" / (utt.id + ".vlf");
    write_features(utt.features, path);
    manifest.rows.push_back({utt.id, utt.speaker, utt.phonemes, path});
  }
  manifest.save(dir / "manifest.tsv");

  std::ofstream truth(dir / "truth.tsv", std::ios::trunc);
  if (!truth) throw FormatError("cannot write " + (dir / "truth.tsv").string());
  truth << "speaker\tduration_multiplier\toffset\n" << std::setprecision(17);
  for (std::size_t s = 0; s < spec.n_speakers; ++s) {
    truth << s << '\t' << corpus.truth.duration_multipliers[s] << '\t';
    for (std::size_t r = 0; r < spec.d_o; ++r) truth << (r ? " " : "") << corpus.truth.offsets(s, r);
    truth << '\n';
  }
  return manifest;
}

}  // namespace voiceloop
