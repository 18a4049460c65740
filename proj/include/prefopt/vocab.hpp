#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace prefopt {

// Character-level vocabulary with dense ids. Ids 0..2 are reserved for the
// pad/bos/eos markers; real characters follow in sorted order.
class Vocab {
 public:
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kBos = 1;
  static constexpr int64_t kEos = 2;

  // Builds from the set of characters appearing in the given texts.
  static Vocab build(std::span<const std::string> texts);
  // Restores from an explicit symbol table (checkpoint load).
  static Vocab from_symbols(std::vector<std::string> symbols);

  int64_t size() const { return static_cast<int64_t>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::vector<int64_t> encode(const std::string& text) const;
  std::string decode(std::span<const int64_t> ids) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<char, int64_t> index_;
};

// Tokenized prompt/response with an explicit boundary. Only `response_ids`
// counts toward the length that normalizes the reward.
struct TokenSequence {
  std::vector<int64_t> prompt_ids;
  std::vector<int64_t> response_ids;
};

TokenSequence make_sequence(const Vocab& vocab, const std::string& prompt,
                            const std::string& response);

}  // namespace prefopt
