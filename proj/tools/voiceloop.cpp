// voiceloop: command-line driver for corpus generation, training, synthesis,
// speaker fitting and evaluation.
//
// Exit status: 0 success, 1 usage error, 2 data or format error, 3 numerical
// error (including a failed gradient check).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "voiceloop/corpus.hpp"
#include "voiceloop/errors.hpp"
#include "voiceloop/eval.hpp"
#include "voiceloop/features.hpp"
#include "voiceloop/grad.hpp"
#include "voiceloop/kernels.hpp"
#include "voiceloop/model.hpp"
#include "voiceloop/phonemes.hpp"
#include "voiceloop/rng.hpp"
#include "voiceloop/train.hpp"
#include "voiceloop/weights_io.hpp"

namespace fs = std::filesystem;
using namespace voiceloop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string weights;
  std::string out;
  int jobs = 0;
  std::string inventory;
  std::string dict;
  std::string manifest;
};

// Input sentence given as ids, symbols or text.
struct SentenceOptions {
  std::string ids;
  std::string symbols;
  std::string text;
};

struct SpeakerOptions {
  std::optional<std::size_t> id;
  std::string z_file;
};

struct SynthOptions {
  SentenceOptions sentence;
  SpeakerOptions speaker;
  std::string attention_out;
  std::optional<std::size_t> max_frames;
  bool ignore_stop = false;
};

cli::RunConfig make_config(const GlobalOptions& g) {
  cli::RunConfig cfg = g.config.empty() ? cli::RunConfig{} : cli::load_config(g.config);
  if (g.seed) cfg.apply_seed(*g.seed);
  cfg.train.jobs = g.jobs;
  if (g.jobs > 0) kernels::set_max_threads(g.jobs);
  return cfg;
}

void log_run(const char* command, const cli::RunConfig& cfg) {
  std::cerr << "[" << command << "] seed=" << cfg.seed << " config=" << cli::dump_config(cfg)
            << "\n";
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  return value;
}

PhonemeInventory load_inventory(const GlobalOptions& g) {
  return g.inventory.empty() ? PhonemeInventory::default_inventory()
                             : PhonemeInventory::load(g.inventory);
}

std::vector<PhonemeId> read_sentence(const SentenceOptions& s, const GlobalOptions& g,
                                     const char* what) {
  const int given = !s.ids.empty() + !s.symbols.empty() + !s.text.empty();
  if (given != 1)
    throw UsageError(std::string(what) + ": give exactly one of the id, symbol or text forms");
  if (!s.ids.empty()) return parse_phoneme_ids(s.ids);
  const auto inventory = load_inventory(g);
  if (!s.symbols.empty()) return parse_phoneme_symbols(s.symbols, inventory);
  const auto dictionary = PronouncingDictionary::load(require(g.dict, "--dict"));
  return g2p(s.text, dictionary, inventory);
}

void add_sentence_flags(CLI::App* cmd, SentenceOptions& s, const std::string& prefix) {
  cmd->add_option("--" + prefix + "ids", s.ids, "Space-separated phoneme ids");
  cmd->add_option("--" + prefix + "symbols", s.symbols, "Space-separated phoneme symbols");
  cmd->add_option("--" + prefix + "text", s.text, "Text, converted with --dict and --inventory");
}

std::vector<double> read_z(const fs::path& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open speaker embedding " + path.string());
  std::vector<double> z;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw FormatError("bad value '" + token + "' in " + path.string());
    z.push_back(v);
  }
  if (z.size() != expected)
    throw FormatError(path.string() + " holds " + std::to_string(z.size()) + " values, expected " +
                      std::to_string(expected));
  return z;
}

void write_z(const std::vector<double>& z, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  char buf[64];
  for (double v : z) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

std::vector<double> resolve_speaker(const SpeakerOptions& s, const ModelParams& params) {
  if (s.id.has_value() == !s.z_file.empty())
    throw UsageError("give exactly one of --speaker or --z");
  if (s.id) {
    if (*s.id >= params.hyper.n_speakers)
      throw InvalidInput("speaker " + std::to_string(*s.id) + " not in the lookup table (N = " +
                         std::to_string(params.hyper.n_speakers) + ")");
    return params.speaker(*s.id);
  }
  return read_z(s.z_file, params.hyper.d_s());
}

void add_synth_flags(CLI::App* cmd, SynthOptions& o) {
  add_sentence_flags(cmd, o.sentence, "");
  cmd->add_option("--speaker", o.speaker.id, "Training speaker id");
  cmd->add_option("--z", o.speaker.z_file, "Speaker embedding file (one value per line)");
  cmd->add_option("--attention", o.attention_out, "Write the attention weights (T x l) here");
  cmd->add_option("--max-frames", o.max_frames, "Frame cap");
  cmd->add_flag("--ignore-stop", o.ignore_stop, "Run to the frame cap");
}

SynthesisConfig synthesis_config(const cli::RunConfig& cfg, const SynthOptions& o) {
  SynthesisConfig s = cfg.synthesis;
  if (o.max_frames) s.max_frames = *o.max_frames;
  if (o.ignore_stop) s.ignore_stop = true;
  return s;
}

void write_synthesis(const SynthesisResult& r, const fs::path& out, const std::string& attention) {
  write_features(FeatureSequence{r.frames}, out);
  if (!attention.empty()) write_matrix(r.trace.alpha, attention);
  std::cerr << "wrote " << r.frames.rows() << " frames to " << out.string()
            << " (stop: " << to_string(r.stop_reason) << ")\n";
}

CoeffRange parse_range(const std::string& spec) {
  if (spec.empty() || spec == "full") return {};
  if (spec == "cepstrum") return kVocoderCepstrum;
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("--coeffs expects full, cepstrum or BEGIN:END");
  try {
    return {std::stoul(spec.substr(0, colon)), std::stoul(spec.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("--coeffs expects full, cepstrum or BEGIN:END");
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gen_corpus(const GlobalOptions& g) {
  auto cfg = make_config(g);
  log_run("gen-corpus", cfg);
  const auto manifest = generate_synthetic_corpus(cfg.corpus, require(g.out, "--out"));
  std::cerr << "wrote " << manifest.rows.size() << " utterances to " << g.out << "\n";
  return kExitOk;
}

struct TrainOptions {
  std::string init;
  std::string resume;
  std::string log;
  std::string checkpoint;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
};

int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  auto cfg = make_config(g);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.lr) cfg.train.learning_rate = *o.lr;
  if (!o.checkpoint.empty()) cfg.train.checkpoint_path = o.checkpoint;
  if (cfg.train.checkpoint_interval > 0 && cfg.train.checkpoint_path.empty())
    throw UsageError("checkpoint_interval set without --checkpoint");
  const fs::path out = require(g.out, "--out");
  log_run("train", cfg);

  const auto manifest = CorpusManifest::load(require(g.manifest, "--manifest"));
  OptimizerSnapshot snapshot;
  ModelParams params;
  if (!o.resume.empty()) params = load_checkpoint(o.resume, &snapshot);
  else if (!o.init.empty()) params = load_weights(o.init);
  else params = init_params(cfg.model, cfg.init_seed());
  const auto corpus = load_corpus(manifest, params.hyper.d_o);

  const auto result = train(
      std::move(params), corpus, cfg.train, cfg.teacher_forcing,
      [](const EpochStats& e) {
        std::cerr << "epoch " << e.epoch << " steps " << e.steps << " loss " << e.mean_loss << " ("
                  << e.seconds << " s)\n";
      },
      o.resume.empty() ? nullptr : &snapshot);
  save_weights(result.params, out);
  if (!o.log.empty()) {
    auto log = open_out(o.log);
    result.log.write_tsv(log);
  }
  return kExitOk;
}

int cmd_synth(const GlobalOptions& g, const SynthOptions& o) {
  const auto cfg = make_config(g);
  const fs::path out = require(g.out, "--out");
  log_run("synth", cfg);
  const auto params = load_weights(require(g.weights, "--weights"));
  const auto phonemes = read_sentence(o.sentence, g, "synth");
  const auto z = resolve_speaker(o.speaker, params);
  const auto result = synthesize<double>(phonemes, z, params, synthesis_config(cfg, o));
  write_synthesis(result, out, o.attention_out);
  return kExitOk;
}

struct PrimeOptions {
  SynthOptions target;
  SentenceOptions prime;
};

int cmd_prime_synth(const GlobalOptions& g, const PrimeOptions& o) {
  const auto cfg = make_config(g);
  const fs::path out = require(g.out, "--out");
  log_run("prime-synth", cfg);
  const auto params = load_weights(require(g.weights, "--weights"));
  const auto phonemes = read_sentence(o.target.sentence, g, "prime-synth target");
  const auto prime_phonemes = read_sentence(o.prime, g, "prime-synth prime");
  const auto z = resolve_speaker(o.target.speaker, params);
  const auto synth_cfg = synthesis_config(cfg, o.target);
  const Buffer prime = prime_buffer(params, z, prime_phonemes, cfg.synthesis);
  const auto result = synthesize<double>(phonemes, z, params, synth_cfg, &prime);
  write_synthesis(result, out, o.target.attention_out);
  return kExitOk;
}

struct FitOptions {
  std::string init_z;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::string log;
};

int cmd_fit_speaker(const GlobalOptions& g, const FitOptions& o) {
  auto cfg = make_config(g);
  if (o.epochs) cfg.fit.epochs = *o.epochs;
  if (o.lr) cfg.fit.learning_rate = *o.lr;
  const fs::path out = require(g.out, "--out");
  log_run("fit-speaker", cfg);
  const auto params = load_weights(require(g.weights, "--weights"));
  const auto samples =
      load_corpus(CorpusManifest::load(require(g.manifest, "--manifest")), params.hyper.d_o);
  std::optional<std::vector<double>> initial;
  if (!o.init_z.empty()) initial = read_z(o.init_z, params.hyper.d_s());
  const auto fit = fit_speaker(params, samples, cfg.fit, cfg.teacher_forcing, initial);
  write_z(fit.z, out);
  if (!o.log.empty()) {
    auto log = open_out(o.log);
    log << "iteration\tloss\n";
    for (std::size_t i = 0; i < fit.history.size(); ++i) log << i << "\t" << fit.history[i] << "\n";
  }
  std::cerr << "fitted from " << samples.size() << " utterances, final loss " << fit.loss << "\n";
  return kExitOk;
}

struct McdOptions {
  std::string reference;
  std::string generated;
  std::string coeffs = "full";
  bool no_dtw = false;
};

int cmd_eval_mcd(const GlobalOptions& g, const McdOptions& o) {
  const auto a = read_features(o.reference);
  const auto b = read_features(o.generated, a.dim());
  const CoeffRange range = parse_range(o.coeffs);
  double value = 0;
  std::size_t path_length = 0;
  if (o.no_dtw) {
    if (a.length() != b.length())
      throw InvalidInput("--no-dtw needs sequences of equal length");
    for (std::size_t t = 0; t < a.length(); ++t) value += mcd(a.frames.row(t), b.frames.row(t), range);
    value /= static_cast<double>(a.length());
    path_length = a.length();
  } else {
    const auto r = mcd_dtw(a, b, range);
    value = r.mean_cost;
    path_length = r.length();
  }
  std::ostringstream row;
  row << std::setprecision(10) << o.reference << "\t" << o.generated << "\t" << value << "\t"
      << path_length << "\n";
  const std::string header = "reference\tgenerated\tmcd\tpath_length\n";
  if (g.out.empty()) {
    std::cout << header << row.str();
  } else {
    auto out = open_out(g.out);
    out << header << row.str();
  }
  return kExitOk;
}

struct IdOptions {
  std::string generated;
};

int cmd_eval_id(const GlobalOptions& g, const IdOptions& o) {
  const auto reference = load_corpus(CorpusManifest::load(require(g.manifest, "--manifest")));
  std::map<std::size_t, std::vector<FeatureSequence>> by_speaker;
  for (const auto& u : reference) by_speaker[u.speaker].push_back(u.features);
  const auto classifier = CentroidClassifier::fit(by_speaker);

  const auto generated = load_corpus(CorpusManifest::load(require(o.generated, "--generated")),
                                     reference.front().features.dim());
  std::ostringstream rows;
  std::size_t correct = 0;
  for (const auto& u : generated) {
    const std::size_t predicted = classifier.classify(u.features);
    correct += predicted == u.speaker;
    rows << u.id << "\t" << u.speaker << "\t" << predicted << "\n";
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(generated.size());
  const std::string table = "utterance_id\texpected\tpredicted\n" + rows.str();
  if (g.out.empty()) std::cout << table;
  else open_out(g.out) << table;
  std::cout << "accuracy\t" << correct << "/" << generated.size() << "\t" << accuracy << "\n";
  return kExitOk;
}

struct GradcheckOptions {
  std::size_t length = 5;
  std::size_t frames = 6;
  double eps = 1e-5;
  double tolerance = 1e-4;
  double residual = 0.1;
  std::size_t max_coordinates = 0;
};

int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o) {
  cli::RunConfig cfg = make_config(g);
  if (g.config.empty()) {
    cfg.model = HyperParams{};
    cfg.model.d_p = 4;
    cfg.model.d_o = 3;
    cfg.model.k = 3;
    cfg.model.c = 2;
  }
  log_run("gradcheck", cfg);
  const auto params = generic_params(cfg.model, cfg.init_seed());
  const std::vector<double> z = params.speaker(0);
  const auto example = near_target_example(params, z, o.length, o.frames, cfg.teacher_forcing,
                                           derive_seed(cfg.seed, 5), o.residual);

  const auto report = finite_diff_check(params, z, example, cfg.teacher_forcing, o.eps,
                                        o.max_coordinates, derive_seed(cfg.seed, 6));
  report.print(std::cout);
  if (!g.out.empty()) {
    auto out = open_out(g.out);
    report.write_rows(out);
  }
  const bool ok = report.max_rel_error() < o.tolerance;
  std::cout << (ok ? "ok" : "FAILED") << ": max relative error " << report.max_rel_error()
            << (ok ? " < " : " >= ") << o.tolerance << "\n";
  return ok ? kExitOk : kExitNumerical;
}

int cmd_significance(const GlobalOptions& g) {
  const auto params = load_weights(require(g.weights, "--weights"));
  const auto p = memory_significance(params);
  std::ostringstream table;
  table << "column\tupdate\tattention\toutput\n" << std::setprecision(8);
  for (std::size_t j = 0; j < p.attention.size(); ++j)
    table << j + 1 << "\t" << p.update[j] << "\t" << p.attention[j] << "\t" << p.output[j] << "\n";
  if (g.out.empty()) std::cout << table.str();
  else open_out(g.out) << table.str();
  return kExitOk;
}

struct BenchOptions {
  std::size_t phonemes = 100;
  std::size_t frames = 1000;
  std::size_t repeats = 3;
};

int cmd_bench(const GlobalOptions& g, const BenchOptions& o) {
  GlobalOptions single = g;
  if (single.jobs == 0) single.jobs = 1;
  auto cfg = make_config(single);
  cfg.model = HyperParams{};
  log_run("bench", cfg);
  if (o.phonemes == 0 || o.frames == 0 || o.repeats == 0)
    throw UsageError("--phonemes, --frames and --repeats must be positive");

  const ModelParams params =
      g.weights.empty() ? init_params(cfg.model, cfg.init_seed()) : load_weights(g.weights);
  if (!(params.hyper == HyperParams{}))
    throw InvalidInput("bench runs the default full-size configuration only");
  const auto fast = cast_params<float>(params);
  Rng rng(derive_seed(cfg.seed, 7));
  std::vector<PhonemeId> sentence(o.phonemes);
  for (auto& p : sentence) p = rng.below(cfg.model.n_phonemes);
  std::vector<float> z(cfg.model.d_s());
  const auto z64 = params.speaker(0);
  std::copy(z64.begin(), z64.end(), z.begin());

  SynthesisConfig synth;
  synth.ignore_stop = true;
  synth.max_frames = o.frames;
  synthesize<float>(sentence, z, fast, synth);  // warm-up

  double best = 0;
  for (std::size_t r = 0; r < o.repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = synthesize<float>(sentence, z, fast, synth);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    best = std::max(best, static_cast<double>(result.frames.rows()) / seconds);
  }
  const double frame_shift_ms = 5.0;
  const double rtf = best * frame_shift_ms / 1000.0;
  std::cout << "parameters\t" << parameter_count(cfg.model) << "\n"
            << "threads\t" << kernels::max_threads() << "\n"
            << "frames_per_second\t" << std::fixed << std::setprecision(1) << best << "\n"
            << "real_time_factor\t" << std::setprecision(3) << rtf << "\n";
  return kExitOk;
}

int cmd_inspect(const GlobalOptions& g) {
  ModelParams params;
  if (!g.weights.empty()) {
    params = load_weights(g.weights);
  } else {
    const auto cfg = make_config(g);
    params = ModelParams(cfg.model);
  }
  const auto& h = params.hyper;
  std::cout << "d_p " << h.d_p << "  d_o " << h.d_o << "  k " << h.k << "  c " << h.c
            << "  n_phonemes " << h.n_phonemes << "  n_speakers " << h.n_speakers
            << "  update " << (h.update == BufferUpdate::kNetwork ? "network" : "concat") << "\n";
  const auto shape = [](const auto& m) {
    return std::to_string(m.rows()) + " x " + std::to_string(m.cols());
  };
  const auto vec = [](const auto& v) { return std::to_string(v.size()); };
  std::cout << std::left << std::setw(16) << "lut_p" << shape(params.lut_p) << "\n"
            << std::setw(16) << "lut_s" << shape(params.lut_s) << "\n"
            << std::setw(16) << "f_u" << shape(params.f_u) << "\n"
            << std::setw(16) << "f_o" << shape(params.f_o) << "\n";
  for (const auto& [name, net] : {std::pair<const char*, const Mlp*>{"attention", &params.attention},
                                  {"update", &params.update},
                                  {"output", &params.output}}) {
    const std::string n = name;
    std::cout << std::setw(16) << n + ".w1" << shape(net->w1) << "\n"
              << std::setw(16) << n + ".b1" << vec(net->b1) << "\n"
              << std::setw(16) << n + ".w2" << shape(net->w2) << "\n"
              << std::setw(16) << n + ".b2" << vec(net->b2) << "\n";
  }
  std::size_t total = 0;
  params.for_each_tensor([&](const std::string&, auto span) { total += span.size(); });
  std::cout << "parameters " << total << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Buffer-memory speech synthesis: train, synthesize, fit speakers, evaluate."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration; flags override it");
  app.add_option("--seed", g.seed, "Seed for every random stream (overrides the config)");
  app.add_option("--weights", g.weights, "Model weight file (VLW1)");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--jobs", g.jobs, "Worker thread bound, 0 = OpenMP default")->check(CLI::NonNegativeNumber);
  app.add_option("--inventory", g.inventory, "Phoneme inventory, one symbol per line");
  app.add_option("--dict", g.dict, "Pronouncing dictionary");
  app.add_option("--manifest", g.manifest, "Corpus manifest (TSV)");

  std::function<int()> run;

  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus to --out (a directory)");
  gen->callback([&] { run = [&] { return cmd_gen_corpus(g); }; });

  TrainOptions train_opts;
  auto* tr = app.add_subcommand("train", "Train on --manifest, write weights to --out");
  tr->add_option("--init", train_opts.init, "Start from these weights instead of a fresh init");
  tr->add_option("--resume", train_opts.resume, "Resume from a checkpoint");
  tr->add_option("--checkpoint", train_opts.checkpoint, "Checkpoint path (with checkpoint_interval)");
  tr->add_option("--log", train_opts.log, "Per-epoch loss log (TSV)");
  tr->add_option("--epochs", train_opts.epochs, "Override train.epochs");
  tr->add_option("--lr", train_opts.lr, "Override train.learning_rate");
  tr->callback([&] { run = [&] { return cmd_train(g, train_opts); }; });

  SynthOptions synth_opts;
  auto* sy = app.add_subcommand("synth", "Synthesize features for one sentence to --out");
  add_synth_flags(sy, synth_opts);
  sy->callback([&] { run = [&] { return cmd_synth(g, synth_opts); }; });

  FitOptions fit_opts;
  auto* fi = app.add_subcommand("fit-speaker",
                                "Fit a speaker embedding to the utterances in --manifest");
  fi->add_option("--init-z", fit_opts.init_z, "Starting embedding");
  fi->add_option("--epochs", fit_opts.epochs, "Override fit.epochs");
  fi->add_option("--lr", fit_opts.lr, "Override fit.learning_rate");
  fi->add_option("--log", fit_opts.log, "Per-iteration loss log (TSV)");
  fi->callback([&] { run = [&] { return cmd_fit_speaker(g, fit_opts); }; });

  PrimeOptions prime_opts;
  auto* pr = app.add_subcommand("prime-synth", "Synthesize after priming the buffer with another sentence");
  add_synth_flags(pr, prime_opts.target);
  add_sentence_flags(pr, prime_opts.prime, "prime-");
  pr->callback([&] { run = [&] { return cmd_prime_synth(g, prime_opts); }; });

  McdOptions mcd_opts;
  auto* em = app.add_subcommand("eval-mcd", "MCD (DTW-aligned by default) between two feature files");
  em->add_option("--reference", mcd_opts.reference, "Reference features")->required();
  em->add_option("--generated", mcd_opts.generated, "Generated features")->required();
  em->add_option("--coeffs", mcd_opts.coeffs, "full, cepstrum or BEGIN:END (0-based, half-open)");
  em->add_flag("--no-dtw", mcd_opts.no_dtw, "Frame-by-frame MCD of equal-length sequences");
  em->callback([&] { run = [&] { return cmd_eval_mcd(g, mcd_opts); }; });

  IdOptions id_opts;
  auto* ei = app.add_subcommand(
      "eval-id", "Classify --generated utterances with centroids built from --manifest");
  ei->add_option("--generated", id_opts.generated, "Manifest of generated features")->required();
  ei->callback([&] { run = [&] { return cmd_eval_id(g, id_opts); }; });

  GradcheckOptions gc_opts;
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc->add_option("--length", gc_opts.length, "Phonemes in the test sentence")->check(CLI::PositiveNumber);
  gc->add_option("--frames", gc_opts.frames, "Target frames")->check(CLI::PositiveNumber);
  gc->add_option("--eps", gc_opts.eps, "Finite-difference step");
  gc->add_option("--tolerance", gc_opts.tolerance, "Maximum accepted relative error");
  gc->add_option("--residual", gc_opts.residual,
                 "Std of the target around the model's teacher-forced outputs");
  gc->add_option("--max-coordinates", gc_opts.max_coordinates,
                 "Sampled coordinates per tensor, 0 = all");
  gc->callback([&] { run = [&] { return cmd_gradcheck(g, gc_opts); }; });

  auto* si = app.add_subcommand("significance", "Per-column buffer weight magnitudes of --weights");
  si->callback([&] { run = [&] { return cmd_significance(g); }; });

  BenchOptions bench_opts;
  auto* be = app.add_subcommand("bench", "Single-core full-size synthesis speed");
  be->add_option("--phonemes", bench_opts.phonemes, "Input length");
  be->add_option("--frames", bench_opts.frames, "Frames generated per run");
  be->add_option("--repeats", bench_opts.repeats, "Timed runs; the fastest is reported");
  be->callback([&] { run = [&] { return cmd_bench(g, bench_opts); }; });

  auto* in = app.add_subcommand("inspect", "Parameter count and tensor shapes");
  in->callback([&] { run = [&] { return cmd_inspect(g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
