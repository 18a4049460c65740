#include "prefopt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "prefopt/error.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

double round1(double x) { return std::round(x * 10.0) / 10.0; }

ResponseEntry make_entry(std::string text, double raw) {
  return {std::move(text), raw, raw / 10.0};
}

[[noreturn]] void line_fail(const std::filesystem::path& path, size_t line,
                            const std::string& what) {
  fail(ErrKind::io, path.string(), ":", line, ": ", what);
}

}  // namespace

std::vector<PreferenceRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrKind::io, "cannot open ", path.string());
  std::vector<PreferenceRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      line_fail(path, line_no, msg("invalid JSON: ", e.what()));
    }
    if (!j.is_object()) line_fail(path, line_no, "record is not a JSON object");
    if (!j.contains("prompt") || !j["prompt"].is_string())
      line_fail(path, line_no, "missing string field 'prompt'");
    if (!j.contains("responses") || !j["responses"].is_array())
      line_fail(path, line_no, "missing array field 'responses'");
    const auto& arr = j["responses"];
    if (arr.empty()) line_fail(path, line_no, "record has fewer than 1 response");

    PreferenceRecord rec;
    rec.prompt = j["prompt"].get<std::string>();
    for (size_t i = 0; i < arr.size(); ++i) {
      const auto& r = arr[i];
      if (!r.is_object() || !r.contains("text") || !r["text"].is_string())
        line_fail(path, line_no, msg("response ", i, ": missing string field 'text'"));
      if (!r.contains("score") || !r["score"].is_number())
        line_fail(path, line_no, msg("response ", i, ": missing numeric field 'score'"));
      std::string text = r["text"].get<std::string>();
      if (text.empty())
        line_fail(path, line_no, msg("response ", i, ": empty text"));
      const double raw = r["score"].get<double>();
      if (!(raw >= 1.0 && raw <= 10.0))
        line_fail(path, line_no,
                  msg("response ", i, ": score out of range [1,10]: ", raw));
      rec.responses.push_back(make_entry(std::move(text), raw));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_records(const std::filesystem::path& path,
                  const std::vector<PreferenceRecord>& records) {
  std::ofstream out(path);
  if (!out) fail(ErrKind::io, "cannot write ", path.string());
  for (const auto& rec : records) {
    nlohmann::json j;
    j["prompt"] = rec.prompt;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rec.responses)
      arr.push_back({{"text", r.text}, {"score", r.raw_score}});
    j["responses"] = std::move(arr);
    out << j.dump() << "\n";
  }
  if (!out) fail(ErrKind::io, "write failed for ", path.string());
}

std::vector<PointwiseItem> expand_pointwise(
    const std::vector<PreferenceRecord>& records) {
  std::vector<PointwiseItem> items;
  for (size_t r = 0; r < records.size(); ++r)
    for (size_t i = 0; i < records[r].responses.size(); ++i)
      items.push_back({static_cast<int64_t>(r), static_cast<int64_t>(i)});
  return items;
}

std::optional<MnView> build_mn_view(const PreferenceRecord& record) {
  if (record.responses.size() < 2)
    fail(ErrKind::value, "mn view needs at least 2 responses, got ",
         record.responses.size());
  size_t best = 0;
  for (size_t i = 1; i < record.responses.size(); ++i)
    if (record.responses[i].raw_score > record.responses[best].raw_score) best = i;
  MnView view;
  view.chosen = static_cast<int64_t>(best);
  for (size_t i = 0; i < record.responses.size(); ++i)
    if (record.responses[i].raw_score < record.responses[best].raw_score)
      view.rejected.push_back(static_cast<int64_t>(i));
  if (view.rejected.empty()) return std::nullopt;  // every score equals the max
  return view;
}

std::vector<McPair> build_mc_view(const PreferenceRecord& record) {
  if (record.responses.size() < 2)
    fail(ErrKind::value, "mc view needs at least 2 responses, got ",
         record.responses.size());
  std::vector<McPair> pairs;
  for (size_t i = 0; i + 1 < record.responses.size(); ++i)
    for (size_t j = i + 1; j < record.responses.size(); ++j) {
      const double si = record.responses[i].raw_score;
      const double sj = record.responses[j].raw_score;
      if (si == sj) continue;
      if (si > sj)
        pairs.push_back({static_cast<int64_t>(i), static_cast<int64_t>(j)});
      else
        pairs.push_back({static_cast<int64_t>(j), static_cast<int64_t>(i)});
    }
  return pairs;
}

std::vector<int64_t> build_list_view(const PreferenceRecord& record) {
  if (record.responses.empty())
    fail(ErrKind::value, "list view needs at least 1 response");
  std::vector<int64_t> order(record.responses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return record.responses[static_cast<size_t>(a)].raw_score >
           record.responses[static_cast<size_t>(b)].raw_score;
  });
  return order;
}

int64_t edit_distance(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), int64_t{0});
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double GroundTruthScorer::score(const std::string& response) const {
  const auto longest = std::max<size_t>({target.size(), response.size(), 1});
  const double similarity =
      1.0 - static_cast<double>(edit_distance(target, response)) /
                static_cast<double>(longest);
  return round1(1.0 + 9.0 * similarity);
}

std::vector<PreferenceRecord> generate_synthetic(int64_t num_prompts,
                                                 int64_t responses_per_prompt,
                                                 double noise, uint64_t seed) {
  if (num_prompts < 1)
    fail(ErrKind::value, "generate_synthetic: num_prompts must be >= 1, got ",
         num_prompts);
  if (responses_per_prompt < 1)
    fail(ErrKind::value,
         "generate_synthetic: responses_per_prompt must be >= 1, got ",
         responses_per_prompt);
  if (noise < 0.0)
    fail(ErrKind::value, "generate_synthetic: noise must be >= 0, got ", noise);

  // Reference answers draw only on letters a..o; corruptions substitute
  // letters from the disjoint range p..z. The trained policy therefore
  // separates clean from corrupted text sharply.
  static const char* kWords[] = {"bald", "cane", "dock", "each", "fang", "gold",
                                 "hike", "idle", "jade", "keno", "lime", "mach",
                                 "node", "echo", "flag", "glen"};
  static const char kNoise[] = "pqrstuvwxyz";

  Rng rng = Rng::substream(seed, "data");
  std::vector<PreferenceRecord> records;
  records.reserve(static_cast<size_t>(num_prompts));

  for (int64_t q = 0; q < num_prompts; ++q) {
    PreferenceRecord rec;
    char prompt[32];
    std::snprintf(prompt, sizeof prompt, "q%03lld?", static_cast<long long>(q));
    rec.prompt = prompt;

    std::string reference;
    const uint64_t word_count = 3 + rng.below(4);
    for (uint64_t w = 0; w < word_count; ++w) {
      if (!reference.empty()) reference += ' ';
      reference += kWords[rng.below(16)];
    }
    GroundTruthScorer scorer{reference};

    std::vector<size_t> letter_positions;
    for (size_t i = 0; i < reference.size(); ++i)
      if (reference[i] != ' ') letter_positions.push_back(i);

    for (int64_t slot = 0; slot < responses_per_prompt; ++slot) {
      std::string text = reference;
      if (slot > 0) {
        const double rate = std::min(0.15 * static_cast<double>(slot), 0.6);
        auto corrupt = static_cast<size_t>(
            rate * static_cast<double>(letter_positions.size()));
        corrupt = std::max<size_t>(corrupt, 1);
        corrupt = std::min(corrupt, letter_positions.size());
        std::vector<size_t> positions = letter_positions;
        rng.shuffle(positions);
        for (size_t k = 0; k < corrupt; ++k)
          text[positions[k]] = kNoise[rng.below(sizeof kNoise - 1)];
      }
      double raw = scorer.score(text);
      if (noise > 0.0)
        raw = std::clamp(round1(raw + rng.normal(0.0, noise)), 1.0, 10.0);
      rec.responses.push_back(make_entry(std::move(text), raw));
    }
    rng.shuffle(rec.responses);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace prefopt
