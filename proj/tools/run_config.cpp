#include "run_config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "voiceloop/errors.hpp"
#include "voiceloop/rng.hpp"

namespace voiceloop::cli {
namespace {

using nlohmann::json;
using Setter = std::function<void(const json&)>;
using Section = std::map<std::string, Setter>;

template <typename T>
Setter field(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

void apply_section(const json& object, const Section& section, const std::string& where) {
  if (!object.is_object()) throw FormatError(where + " must be an object");
  for (const auto& [key, value] : object.items()) {
    const auto it = section.find(key);
    if (it == section.end()) throw FormatError("unknown config key '" + where + "." + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw FormatError("config key '" + where + "." + key + "': " + e.what());
    } catch (const InvalidInput& e) {
      throw FormatError("config key '" + where + "." + key + "': " + e.what());
    }
  }
}

Section model_section(HyperParams& h) {
  return {{"d_p", field(h.d_p)},
          {"d_o", field(h.d_o)},
          {"k", field(h.k)},
          {"c", field(h.c)},
          {"n_phonemes", field(h.n_phonemes)},
          {"n_speakers", field(h.n_speakers)},
          {"hidden_divisor", field(h.hidden_divisor)},
          {"update", [&h](const json& v) {
             const auto name = v.get<std::string>();
             if (name == "network") h.update = BufferUpdate::kNetwork;
             else if (name == "concat") h.update = BufferUpdate::kConcat;
             else throw InvalidInput("expected \"network\" or \"concat\"");
           }}};
}

Section train_section(TrainConfig& t) {
  return {{"optimizer", [&t](const json& v) { t.optimizer = parse_optimizer(v.get<std::string>()); }},
          {"learning_rate", field(t.learning_rate)},
          {"momentum", field(t.momentum)},
          {"beta1", field(t.beta1)},
          {"beta2", field(t.beta2)},
          {"epsilon", field(t.epsilon)},
          {"epochs", field(t.epochs)},
          {"batch_size", field(t.batch_size)},
          {"clip_norm", field(t.clip_norm)},
          {"checkpoint_interval", field(t.checkpoint_interval)}};
}

Section corpus_section(SyntheticCorpusSpec& c) {
  return {{"n_speakers", field(c.n_speakers)},
          {"n_sentences", field(c.n_sentences)},
          {"min_phonemes", field(c.min_phonemes)},
          {"max_phonemes", field(c.max_phonemes)},
          {"min_frames", field(c.min_frames)},
          {"max_frames", field(c.max_frames)},
          {"d_o", field(c.d_o)},
          {"n_phonemes", field(c.n_phonemes)},
          {"template_scale", field(c.template_scale)},
          {"offset_scale", field(c.offset_scale)},
          {"duration_min", field(c.duration_min)},
          {"duration_max", field(c.duration_max)},
          {"duration_multipliers", field(c.duration_multipliers)},
          {"noise_std", field(c.noise_std)},
          {"frame_shift_ms", field(c.frame_shift_ms)}};
}

}  // namespace

RunConfig::RunConfig() {
  fit.optimizer = OptimizerKind::kSgd;
  fit.learning_rate = 0.01;
  fit.epochs = 200;
  apply_seed(seed);
}

std::uint64_t RunConfig::init_seed() const { return derive_seed(seed, 0); }

void RunConfig::apply_seed(std::uint64_t new_seed) {
  seed = new_seed;
  train.seed = derive_seed(seed, 1);
  teacher_forcing.seed = derive_seed(seed, 2);
  fit.seed = derive_seed(seed, 3);
  corpus.seed = derive_seed(seed, 4);
}

void merge_config(RunConfig& cfg, const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  std::optional<std::uint64_t> seed;
  Section top{
      {"seed", [&seed](const json& v) { seed = v.get<std::uint64_t>(); }},
      {"model", [&cfg](const json& v) { apply_section(v, model_section(cfg.model), "model"); }},
      {"train", [&cfg](const json& v) { apply_section(v, train_section(cfg.train), "train"); }},
      {"teacher_forcing",
       [&cfg](const json& v) {
         auto& tf = cfg.teacher_forcing;
         apply_section(v,
                       {{"noise_std", field(tf.noise_std)},
                        {"detach_previous_output", field(tf.detach_previous_output)}},
                       "teacher_forcing");
       }},
      {"synthesis",
       [&cfg](const json& v) {
         auto& s = cfg.synthesis;
         apply_section(v,
                       {{"stop_margin", field(s.stop_margin)},
                        {"frames_per_phoneme", field(s.frames_per_phoneme)},
                        {"max_frames", [&s](const json& m) { s.max_frames = m.get<std::size_t>(); }}},
                       "synthesis");
       }},
      {"fit",
       [&cfg](const json& v) {
         auto& f = cfg.fit;
         apply_section(v,
                       {{"learning_rate", field(f.learning_rate)},
                        {"epochs", field(f.epochs)},
                        {"batch_size", field(f.batch_size)}},
                       "fit");
       }},
      {"corpus", [&cfg](const json& v) { apply_section(v, corpus_section(cfg.corpus), "corpus"); }},
  };
  apply_section(root, top, "config");
  if (seed) cfg.apply_seed(*seed);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig cfg;
  merge_config(cfg, text.str());
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  const auto& h = cfg.model;
  const auto& t = cfg.train;
  json j{
      {"seed", cfg.seed},
      {"model",
       {{"d_p", h.d_p}, {"d_o", h.d_o}, {"k", h.k}, {"c", h.c}, {"n_phonemes", h.n_phonemes},
        {"n_speakers", h.n_speakers}, {"hidden_divisor", h.hidden_divisor},
        {"update", h.update == BufferUpdate::kNetwork ? "network" : "concat"}}},
      {"train",
       {{"optimizer", to_string(t.optimizer)}, {"learning_rate", t.learning_rate},
        {"momentum", t.momentum}, {"beta1", t.beta1}, {"beta2", t.beta2}, {"epsilon", t.epsilon},
        {"epochs", t.epochs}, {"batch_size", t.batch_size}, {"clip_norm", t.clip_norm},
        {"checkpoint_interval", t.checkpoint_interval}}},
      {"teacher_forcing",
       {{"noise_std", cfg.teacher_forcing.noise_std},
        {"detach_previous_output", cfg.teacher_forcing.detach_previous_output}}},
      {"fit",
       {{"learning_rate", cfg.fit.learning_rate}, {"epochs", cfg.fit.epochs},
        {"batch_size", cfg.fit.batch_size}}},
  };
  j["synthesis"] = {{"stop_margin", cfg.synthesis.stop_margin},
                    {"frames_per_phoneme", cfg.synthesis.frames_per_phoneme}};
  if (cfg.synthesis.max_frames) j["synthesis"]["max_frames"] = *cfg.synthesis.max_frames;
  return j.dump();
}

}  // namespace voiceloop::cli
