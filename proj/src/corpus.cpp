#include "voiceloop/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "voiceloop/errors.hpp"
#include "voiceloop/phonemes.hpp"

namespace voiceloop {
namespace {

constexpr const char* kHeader = "utterance_id\tspeaker\tphonemes\tfeatures";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::vector<PhonemeId> read_id_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open phoneme file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_phoneme_ids(buf.str());
}

}  // namespace

std::size_t CorpusManifest::speaker_count() const {
  std::size_t n = 0;
  for (const auto& row : rows) n = std::max(n, row.speaker + 1);
  return n;
}

CorpusManifest CorpusManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw FormatError(path.string() + ": header must be '" + kHeader + "'");

  CorpusManifest manifest;
  std::set<std::size_t> speakers;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto fields = split_tabs(line);
    if (fields.size() != 4) throw FormatError(where + ": expected 4 tab-separated fields");
    ManifestRow row;
    row.utterance_id = fields[0];
    try {
      std::size_t used = 0;
      row.speaker = std::stoul(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("speaker");
      if (!fields[2].empty() && fields[2].front() == '@')
        row.phonemes = read_id_file(base / fields[2].substr(1));
      else
        row.phonemes = parse_phoneme_ids(fields[2]);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (row.phonemes.empty()) throw FormatError(where + ": empty phoneme sequence");
    row.features = base / fields[3];
    if (!std::filesystem::exists(row.features))
      throw FormatError(where + ": missing feature file " + row.features.string());
    speakers.insert(row.speaker);
    manifest.rows.push_back(std::move(row));
  }
  if (manifest.rows.empty()) throw FormatError(path.string() + ": no utterances");
  if (*speakers.rbegin() + 1 != speakers.size())
    throw FormatError(path.string() + ": speaker ids must be dense in [0, N)");
  return manifest;
}

void CorpusManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  out << kHeader << '\n';
  for (const auto& row : rows) {
    auto feat = std::filesystem::absolute(row.features);
    auto rel = feat.lexically_relative(base);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    out << row.utterance_id << '\t' << row.speaker << '\t';
    for (std::size_t i = 0; i < row.phonemes.size(); ++i) out << (i ? " " : "") << row.phonemes[i];
    out << '\t' << (inside ? rel : feat).generic_string() << '\n';
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<Utterance> load_corpus(const CorpusManifest& manifest, std::size_t expected_dim) {
  std::vector<Utterance> corpus;
  corpus.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows)
    corpus.push_back({row.utterance_id, row.speaker, row.phonemes,
                      read_features(row.features, expected_dim)});
  return corpus;
}

}  // namespace voiceloop
