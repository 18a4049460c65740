#include "prefopt/vocab.hpp"

#include <algorithm>
#include <set>

#include "prefopt/error.hpp"

namespace prefopt {

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<char> chars;
  for (const auto& text : texts)
    for (char c : text) chars.insert(c);
  std::vector<std::string> symbols = {"<pad>", "<bos>", "<eos>"};
  for (char c : chars) symbols.emplace_back(1, c);
  return from_symbols(std::move(symbols));
}

Vocab Vocab::from_symbols(std::vector<std::string> symbols) {
  if (symbols.size() < 3 || symbols[0] != "<pad>" || symbols[1] != "<bos>" ||
      symbols[2] != "<eos>")
    fail(ErrKind::value, "vocab: symbol table must start with <pad>,<bos>,<eos>");
  Vocab v;
  v.symbols_ = std::move(symbols);
  for (size_t i = 3; i < v.symbols_.size(); ++i) {
    if (v.symbols_[i].size() != 1)
      fail(ErrKind::value, "vocab: non-character symbol '", v.symbols_[i], "' at id ", i);
    const char c = v.symbols_[i][0];
    if (!v.index_.emplace(c, static_cast<int64_t>(i)).second)
      fail(ErrKind::value, "vocab: duplicate symbol '", v.symbols_[i], "'");
  }
  return v;
}

std::vector<int64_t> Vocab::encode(const std::string& text) const {
  std::vector<int64_t> ids;
  ids.reserve(text.size());
  for (char c : text) {
    auto it = index_.find(c);
    if (it == index_.end())
      fail(ErrKind::value, "encode: character '", std::string(1, c),
           "' not in vocabulary");
    ids.push_back(it->second);
  }
  return ids;
}

std::string Vocab::decode(std::span<const int64_t> ids) const {
  std::string text;
  text.reserve(ids.size());
  for (int64_t id : ids) {
    if (id < 0 || id >= size())
      fail(ErrKind::value, "decode: id ", id, " out of range [0,", size(), ")");
    if (id < 3) fail(ErrKind::value, "decode: reserved id ", id, " has no character");
    text += symbols_[static_cast<size_t>(id)];
  }
  return text;
}

TokenSequence make_sequence(const Vocab& vocab, const std::string& prompt,
                            const std::string& response) {
  if (response.empty()) fail(ErrKind::value, "make_sequence: empty response");
  return TokenSequence{vocab.encode(prompt), vocab.encode(response)};
}

}  // namespace prefopt
