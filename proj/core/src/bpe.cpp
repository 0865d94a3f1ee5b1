#include "laqsum/bpe.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "laqsum/errors.hpp"

namespace laqsum {

namespace utf8 {

namespace {
int sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 0;
}

bool continuation(unsigned char c) { return (c >> 6) == 0x2; }

// Length of the well-formed character at text[i], or 0.
int char_length(std::string_view text, std::size_t i) {
  const int n = sequence_length(static_cast<unsigned char>(text[i]));
  if (n == 0 || i + n > text.size()) return 0;
  for (int k = 1; k < n; ++k)
    if (!continuation(static_cast<unsigned char>(text[i + k]))) return 0;
  return n;
}
}  // namespace

std::vector<std::string> split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    int n = char_length(text, i);
    if (n == 0) n = 1;
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

bool valid(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const int n = char_length(text, i);
    if (n == 0) return false;
    i += n;
  }
  return true;
}

std::uint32_t codepoint(std::string_view ch) {
  if (ch.empty()) return 0;
  const auto lead = static_cast<unsigned char>(ch[0]);
  const int n = sequence_length(lead);
  if (n <= 1 || static_cast<std::size_t>(n) > ch.size()) return lead;
  std::uint32_t cp = lead & (0xFF >> (n + 1));
  for (int k = 1; k < n; ++k) cp = (cp << 6) | (static_cast<unsigned char>(ch[k]) & 0x3F);
  return cp;
}

std::string encode(std::uint32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (cp >> 18));
    s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

}  // namespace utf8

namespace {

bool is_space(const std::string& ch) {
  return ch.size() == 1 && (ch[0] == ' ' || ch[0] == '\t' || ch[0] == '\n' || ch[0] == '\r' ||
                            ch[0] == '\v' || ch[0] == '\f');
}

// A pre-token: either a word (possibly marker-prefixed) split into
// characters, or a single standalone whitespace character.
struct Piece {
  std::vector<std::string> symbols;
  int word_index = 0;
  bool is_word = false;
};

std::vector<Piece> pretokenize(std::string_view text) {
  const auto chars = utf8::split(text);
  std::vector<Piece> pieces;
  std::vector<std::string> pending_space;
  int words = 0;
  std::size_t i = 0;
  while (i < chars.size()) {
    if (is_space(chars[i])) {
      pending_space.push_back(chars[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < chars.size() && !is_space(chars[j])) ++j;
    const bool prefixed = !pending_space.empty() && pending_space.back() == " ";
    if (prefixed) pending_space.pop_back();
    for (const auto& ws : pending_space) {
      pieces.push_back(Piece{{ws == " " ? std::string(kBoundaryMarker) : ws}, words, false});
    }
    pending_space.clear();
    Piece word{{}, words, true};
    if (prefixed) word.symbols.emplace_back(kBoundaryMarker);
    word.symbols.insert(word.symbols.end(), chars.begin() + static_cast<std::ptrdiff_t>(i),
                        chars.begin() + static_cast<std::ptrdiff_t>(j));
    pieces.push_back(std::move(word));
    ++words;
    i = j;
  }
  const int trailing_index = std::max(words - 1, 0);
  for (const auto& ws : pending_space) {
    pieces.push_back(Piece{{ws == " " ? std::string(kBoundaryMarker) : ws}, trailing_index, false});
  }
  return pieces;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      out.push_back(left + right);
      ++i;
    } else {
      out.push_back(symbols[i]);
    }
  }
  symbols = std::move(out);
}

std::string escape_symbol(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ' ': out += "\\s"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\v': out += "\\v"; break;
      case '\f': out += "\\f"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_symbol(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw DataError("merge table: dangling escape");
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 's': out += ' '; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'v': out += '\v'; break;
      case 'f': out += '\f'; break;
      default: throw DataError(std::string("merge table: unknown escape \\") + s[i]);
    }
  }
  return out;
}

}  // namespace

void BpeSequence::check() const {
  if (ids.size() != surfaces.size() || ids.size() != word_index.size()) {
    throw InvariantError("BpeSequence: parallel lists differ in length (ids " + std::to_string(ids.size()) +
                         ", surfaces " + std::to_string(surfaces.size()) + ", word_index " +
                         std::to_string(word_index.size()) + ")");
  }
}

MergeTable MergeTable::train(const std::vector<std::string>& corpus, int num_merges) {
  if (corpus.empty()) throw ConfigError("train_bpe: corpus is empty");
  if (num_merges < 0) throw ConfigError("train_bpe: num_merges must be >= 0");

  std::map<std::vector<std::string>, long> word_counts;
  std::set<std::string> base;
  for (const auto& text : corpus) {
    for (auto& piece : pretokenize(text)) {
      for (const auto& s : piece.symbols) base.insert(s);
      if (piece.is_word) ++word_counts[piece.symbols];
    }
  }
  std::vector<std::pair<std::vector<std::string>, long>> words(word_counts.begin(), word_counts.end());

  MergeTable table;
  table.base_.assign(base.begin(), base.end());
  for (int iter = 0; iter < num_merges; ++iter) {
    std::map<std::pair<std::string, std::string>, long> pair_counts;
    for (const auto& [symbols, count] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pair_counts[{symbols[i], symbols[i + 1]}] += count;
    }
    if (pair_counts.empty()) break;
    // std::map iterates pairs in lexicographic order, so the first maximum
    // found is the lexicographically smallest among ties.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    table.merges_.emplace_back(left, right);
    for (auto& [symbols, count] : words) apply_merge(symbols, left, right);
  }
  table.rebuild_index();
  return table;
}

void MergeTable::rebuild_index() {
  units_.clear();
  unit_ids_.clear();
  rank_.clear();
  for (const auto& s : base_) {
    if (unit_ids_.emplace(s, static_cast<int>(units_.size())).second) units_.push_back(s);
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [left, right] = merges_[r];
    if (!rank_.emplace(merges_[r], static_cast<int>(r)).second) {
      throw InvariantError("merge table: duplicate rule (" + left + ", " + right + ")");
    }
    const std::string merged = left + right;
    if (unit_ids_.emplace(merged, static_cast<int>(units_.size())).second) units_.push_back(merged);
  }
}

int MergeTable::find(const std::string& unit) const {
  auto it = unit_ids_.find(unit);
  return it == unit_ids_.end() ? -1 : it->second;
}

std::string MergeTable::surface(int id) const {
  if (id >= 0 && id < size()) return units_[static_cast<std::size_t>(id)];
  if (id >= size()) return utf8::encode(static_cast<std::uint32_t>(id - size()));
  throw InvariantError("negative unit id " + std::to_string(id));
}

BpeSequence MergeTable::encode(std::string_view text) const {
  BpeSequence seq;
  for (auto& piece : pretokenize(text)) {
    auto& symbols = piece.symbols;
    // Repeatedly merge the lowest-ranked adjacent pair; equivalent to
    // replaying the rules in training order.
    while (symbols.size() > 1) {
      int best_rank = -1;
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        auto it = rank_.find({symbols[i], symbols[i + 1]});
        if (it != rank_.end() && (best_rank < 0 || it->second < best_rank)) {
          best_rank = it->second;
        }
      }
      if (best_rank < 0) break;
      const auto rule = merges_[static_cast<std::size_t>(best_rank)];
      apply_merge(symbols, rule.first, rule.second);
    }
    for (auto& s : symbols) {
      int id = find(s);
      if (id < 0) id = size() + static_cast<int>(utf8::codepoint(s));
      seq.ids.push_back(id);
      seq.surfaces.push_back(std::move(s));
      seq.word_index.push_back(piece.word_index);
    }
  }
  return seq;
}

BpeSequence MergeTable::encode_prefixed(std::string_view text) const {
  std::string padded;
  padded.reserve(text.size() + 1);
  padded += ' ';
  padded += text;
  return encode(padded);
}

std::string MergeTable::serialize() const {
  std::ostringstream os;
  os << "#laqsum-bpe v1\n";
  os << "base " << base_.size() << '\n';
  for (const auto& s : base_) os << escape_symbol(s) << '\n';
  os << "merges " << merges_.size() << '\n';
  for (const auto& [l, r] : merges_) os << escape_symbol(l) << ' ' << escape_symbol(r) << '\n';
  return os.str();
}

MergeTable MergeTable::deserialize(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  std::size_t li = 0;
  auto next = [&]() -> std::string_view {
    if (li >= lines.size()) throw DataError("merge table: unexpected end of input");
    return lines[li++];
  };
  if (next() != "#laqsum-bpe v1") throw DataError("merge table: bad header");
  auto read_count = [&](std::string_view keyword) {
    const auto line = next();
    if (line.substr(0, keyword.size() + 1) != std::string(keyword) + " ") {
      throw DataError("merge table: expected '" + std::string(keyword) + "' at line " + std::to_string(li));
    }
    return std::stoul(std::string(line.substr(keyword.size() + 1)));
  };
  MergeTable table;
  const auto n_base = read_count("base");
  for (std::size_t i = 0; i < n_base; ++i) table.base_.push_back(unescape_symbol(next()));
  const auto n_merges = read_count("merges");
  for (std::size_t i = 0; i < n_merges; ++i) {
    const auto line = next();
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos) throw DataError("merge table: malformed rule at line " + std::to_string(li));
    table.merges_.emplace_back(unescape_symbol(line.substr(0, sp)), unescape_symbol(line.substr(sp + 1)));
  }
  table.rebuild_index();
  return table;
}

std::string decode(const BpeSequence& seq) {
  seq.check();
  std::string out;
  for (const auto& s : seq.surfaces) {
    std::size_t pos = 0;
    while (pos < s.size()) {
      if (s.compare(pos, kBoundaryMarker.size(), kBoundaryMarker) == 0) {
        out += ' ';
        pos += kBoundaryMarker.size();
      } else {
        out += s[pos++];
      }
    }
  }
  return out;
}

}  // namespace laqsum
