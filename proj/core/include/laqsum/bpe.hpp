#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace laqsum {

// U+2581, prefixed to a word that follows a single space; a standalone unit
// consisting only of the marker stands for one space character.
inline constexpr std::string_view kBoundaryMarker = "\xE2\x96\x81";

// A text segmented into subword units. The three lists run in parallel.
struct BpeSequence {
  std::vector<int> ids;
  std::vector<std::string> surfaces;
  // Index of the whitespace-delimited source word each unit belongs to.
  // Standalone whitespace units take the index of the following word.
  std::vector<int> word_index;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  // Throws InvariantError when the parallel lists disagree in length.
  void check() const;
};

class MergeTable {
 public:
  MergeTable() = default;

  // Greedy most-frequent-pair merging over the words of `corpus`. Ties on
  // the count are broken by the lexicographically smallest (left, right)
  // pair. Stops early when no adjacent pair remains.
  static MergeTable train(const std::vector<std::string>& corpus, int num_merges);

  // Plain-text form: a header, the base vocabulary, then one rule per line.
  std::string serialize() const;
  static MergeTable deserialize(std::string_view text);

  // Units known to the table; ids in [0, size()).
  int size() const { return static_cast<int>(units_.size()); }
  const std::vector<std::string>& base_symbols() const { return base_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  const std::string& unit(int id) const { return units_.at(static_cast<std::size_t>(id)); }
  // -1 when unknown.
  int find(const std::string& unit) const;

  // Applies the merges in rule order to every word of `text`. Characters
  // absent from the base vocabulary become units with id size() + codepoint.
  BpeSequence encode(std::string_view text) const;
  // Encodes " " + text, so the first word carries the boundary marker like
  // every other space-preceded word.
  BpeSequence encode_prefixed(std::string_view text) const;

  // Surface string for any id produced by encode, including overflow ids.
  std::string surface(int id) const;

  bool operator==(const MergeTable& other) const {
    return base_ == other.base_ && merges_ == other.merges_;
  }

 private:
  void rebuild_index();

  std::vector<std::string> base_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> units_;
  std::unordered_map<std::string, int> unit_ids_;
  std::map<std::pair<std::string, std::string>, int> rank_;
};

// Reconstructs the text: surfaces are concatenated and every boundary
// marker becomes one space.
std::string decode(const BpeSequence& seq);

namespace utf8 {
// Splits into code point strings; invalid bytes become one-byte pieces.
std::vector<std::string> split(std::string_view text);
bool valid(std::string_view text);
// Code point of a single UTF-8 character string (first character).
std::uint32_t codepoint(std::string_view ch);
std::string encode(std::uint32_t cp);
}  // namespace utf8

}  // namespace laqsum
