#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace prefopt {

// One scored response. Scores arrive on the 1..10 scale and are normalized
// by exactly raw/10 into (0.1, 1].
struct ResponseEntry {
  std::string text;
  double raw_score = 0.0;   // in [1, 10]
  double norm_score = 0.0;  // raw_score / 10
};

// One prompt with its N+1 scored responses.
struct PreferenceRecord {
  std::string prompt;
  std::vector<ResponseEntry> responses;
};

// JSONL: one {"prompt": str, "responses": [{"text": str, "score": number}]}
// object per line. Malformed lines are reported with their line number.
std::vector<PreferenceRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path,
                  const std::vector<PreferenceRecord>& records);

// Training views. All views reference responses by index into their record.

struct PointwiseItem {
  int64_t record = 0;
  int64_t response = 0;
};
std::vector<PointwiseItem> expand_pointwise(
    const std::vector<PreferenceRecord>& records);

// Chosen = lowest-index maximum-score response; rejected = all strictly
// lower. Returns nothing when every score is equal (record is skipped).
struct MnView {
  int64_t chosen = 0;
  std::vector<int64_t> rejected;
};
std::optional<MnView> build_mn_view(const PreferenceRecord& record);

// All C(N+1,2) unordered index pairs with distinct scores, oriented
// higher-score-first, in ascending (i, j) order. Empty when all tied.
struct McPair {
  int64_t winner = 0;
  int64_t loser = 0;
};
std::vector<McPair> build_mc_view(const PreferenceRecord& record);

// Response indices sorted by raw score descending, stable on ties.
std::vector<int64_t> build_list_view(const PreferenceRecord& record);

// Deterministic ground truth for the synthetic corpus: normalized edit
// distance to a reference answer, mapped affinely onto [1, 10] and rounded
// to one decimal.
struct GroundTruthScorer {
  static constexpr int kVersion = 1;
  std::string target;
  double score(const std::string& response) const;
};

int64_t edit_distance(const std::string& a, const std::string& b);

// Synthetic corpus with known ground truth: each prompt has one reference
// answer; the other responses are graded corruptions of it. `noise` is the
// standard deviation of score jitter (0 disables it). Response order within
// each record is shuffled so position carries no signal.
std::vector<PreferenceRecord> generate_synthetic(int64_t num_prompts,
                                                 int64_t responses_per_prompt,
                                                 double noise, uint64_t seed);

}  // namespace prefopt
