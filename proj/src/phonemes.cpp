#include "voiceloop/phonemes.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "voiceloop/errors.hpp"

namespace voiceloop {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string strip_stress(std::string_view symbol) {
  std::string out(symbol);
  while (!out.empty() && std::isdigit(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out;
}

}  // namespace

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 3)
    throw InventoryError("inventory needs at least one phoneme and two pause symbols");
  for (PhonemeId i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw InventoryError("empty phoneme symbol");
    if (!index_.emplace(symbols_[i], i).second)
      throw InventoryError("duplicate phoneme symbol '" + symbols_[i] + "'");
  }
}

PhonemeInventory PhonemeInventory::default_inventory() {
  return PhonemeInventory({"AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH",
                           "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",
                           "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH", "T",  "TH", "UH",
                           "UW", "V",  "W",  "Y",  "Z",  "ZH", "AX", "SP", "LP"});
}

PhonemeInventory PhonemeInventory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open inventory " + path.string());
  return parse(in);
}

PhonemeInventory PhonemeInventory::parse(std::istream& in) {
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string symbol;
    if (fields >> symbol) symbols.push_back(symbol);
  }
  return PhonemeInventory(std::move(symbols));
}

PhonemeId PhonemeInventory::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw InventoryError("unknown phoneme symbol '" + std::string(symbol) + "'");
  return it->second;
}

bool PhonemeInventory::contains(std::string_view symbol) const {
  return index_.count(std::string(symbol)) > 0;
}

PronouncingDictionary PronouncingDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dictionary " + path.string());
  return parse(in);
}

PronouncingDictionary PronouncingDictionary::parse(std::istream& in) {
  PronouncingDictionary dict;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(";;;", 0) == 0) continue;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    if (word.find('(') != std::string::npos) continue;
    std::vector<std::string> phonemes;
    for (std::string p; fields >> p;) phonemes.push_back(p);
    if (phonemes.empty()) throw FormatError("dictionary entry without phonemes: " + word);
    dict.add(word, std::move(phonemes));
  }
  return dict;
}

void PronouncingDictionary::add(std::string word, std::vector<std::string> phonemes) {
  entries_.insert_or_assign(lowercase(word), std::move(phonemes));
}

const std::vector<std::string>* PronouncingDictionary::find(std::string_view word) const {
  auto it = entries_.find(lowercase(word));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<PhonemeId> g2p(std::string_view text, const PronouncingDictionary& dictionary,
                           const PhonemeInventory& inventory, const PauseRules& rules) {
  std::vector<PhonemeId> out;
  bool saw_word = false;
  Pause pending = rules.long_pause_at_edges ? Pause::kLong : Pause::kNone;

  auto flush_pause = [&] {
    if (pending == Pause::kShort) out.push_back(inventory.short_pause());
    if (pending == Pause::kLong) out.push_back(inventory.long_pause());
    pending = Pause::kNone;
  };
  auto is_word_char = [&](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) ||
           rules.word_characters.find(ch) != std::string::npos;
  };

  const std::string lowered = lowercase(text);
  std::size_t i = 0;
  while (i < lowered.size()) {
    const char ch = lowered[i];
    if (is_word_char(ch)) {
      std::size_t j = i;
      while (j < lowered.size() && is_word_char(lowered[j])) ++j;
      const std::string word = lowered.substr(i, j - i);
      i = j;
      const auto* pron = dictionary.find(word);
      if (!pron) throw OovError(word);
      flush_pause();
      for (const auto& symbol : *pron) out.push_back(inventory.id(strip_stress(symbol)));
      saw_word = true;
      continue;
    }
    if (auto it = rules.punctuation.find(ch); it != rules.punctuation.end() && saw_word)
      pending = std::max(pending, it->second);
    ++i;
  }
  if (!saw_word) throw InvalidInput("text contains no words");
  if (rules.long_pause_at_edges) pending = Pause::kLong;
  flush_pause();
  return out;
}

std::vector<PhonemeId> parse_phoneme_ids(std::string_view text) {
  std::vector<PhonemeId> ids;
  std::istringstream in{std::string(text)};
  for (std::string token; in >> token;) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || token.front() == '-')
      throw InvalidInput("not a phoneme id: '" + token + "'");
    ids.push_back(static_cast<PhonemeId>(v));
  }
  return ids;
}

std::vector<PhonemeId> parse_phoneme_symbols(std::string_view text,
                                             const PhonemeInventory& inventory) {
  std::vector<PhonemeId> ids;
  std::istringstream in{std::string(text)};
  for (std::string token; in >> token;) ids.push_back(inventory.id(strip_stress(token)));
  return ids;
}

}  // namespace voiceloop
