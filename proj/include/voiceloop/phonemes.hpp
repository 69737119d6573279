#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "voiceloop/tensor.hpp"

namespace voiceloop {

// Ordered phoneme symbols. The last two entries are the pause symbols:
// short pause second to last, long pause last.
class PhonemeInventory {
 public:
  // Throws InventoryError on fewer than three symbols or duplicates.
  explicit PhonemeInventory(std::vector<std::string> symbols);

  // 39 ARPAbet phonemes, the filler AX, then SP (short) and LP (long).
  static PhonemeInventory default_inventory();
  // One symbol per line; blank lines and '#' comments ignored.
  static PhonemeInventory load(const std::filesystem::path& path);
  static PhonemeInventory parse(std::istream& in);

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(PhonemeId id) const { return symbols_.at(id); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  // Throws InventoryError for an unknown symbol.
  PhonemeId id(std::string_view symbol) const;
  bool contains(std::string_view symbol) const;
  PhonemeId short_pause() const { return symbols_.size() - 2; }
  PhonemeId long_pause() const { return symbols_.size() - 1; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, PhonemeId> index_;
};

// Word -> phoneme symbols, CMU dictionary style ("WORD  PH1 PH2 ...").
// Keys are lowercased; alternate pronunciations "WORD(2)" are skipped and
// ";;;" comment lines ignored.
class PronouncingDictionary {
 public:
  static PronouncingDictionary load(const std::filesystem::path& path);
  static PronouncingDictionary parse(std::istream& in);

  void add(std::string word, std::vector<std::string> phonemes);
  const std::vector<std::string>* find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

enum class Pause { kNone, kShort, kLong };

// Punctuation handling for g2p, one entry per character. Characters not in
// the table and not part of a word are dropped.
struct PauseRules {
  std::map<char, Pause> punctuation{
      {',', Pause::kShort}, {'.', Pause::kLong}, {'!', Pause::kLong}, {'?', Pause::kLong}};
  // Characters kept inside words (e.g. "don't").
  std::string word_characters = "'";
  bool long_pause_at_edges = true;
};

// Text to phoneme ids:
//  - lowercase, split into words and punctuation
//  - every word looked up in the dictionary, stress digits stripped before
//    the inventory lookup; words concatenate without pauses
//  - punctuation mapped through `rules`; adjacent pauses merge, the longer
//    one wins
//  - a long pause at the start and at the end
// Throws InvalidInput if the text has no words, OovError for a missing word
// and InventoryError for a dictionary symbol outside the inventory.
std::vector<PhonemeId> g2p(std::string_view text, const PronouncingDictionary& dictionary,
                           const PhonemeInventory& inventory, const PauseRules& rules = {});

// Parses whitespace-separated ids, or symbols when an inventory is given.
std::vector<PhonemeId> parse_phoneme_ids(std::string_view text);
std::vector<PhonemeId> parse_phoneme_symbols(std::string_view text,
                                             const PhonemeInventory& inventory);

}  // namespace voiceloop
