#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prefopt/data.hpp"
#include "prefopt/error.hpp"

using namespace prefopt;

namespace {

PreferenceRecord record_with_scores(const std::vector<double>& raw) {
  PreferenceRecord record;
  record.prompt = "q";
  for (double s : raw) record.responses.push_back({"text", s, s / 10.0});
  return record;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("prefopt_data_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string error_text(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an Error");
  return {};
}

}  // namespace

TEST_CASE("pointwise expansion counts") {
  std::vector<PreferenceRecord> records;
  for (int i = 0; i < 10; ++i)
    records.push_back(record_with_scores({9, 7, 4, 2}));
  const auto items = expand_pointwise(records);
  CHECK(items.size() == 40);
  CHECK(items.front().record == 0);
  CHECK(items.back().record == 9);
  CHECK(items.back().response == 3);
}

TEST_CASE("mn view selection") {
  SUBCASE("strict ordering keeps all lower responses") {
    const auto view = build_mn_view(record_with_scores({9, 7, 4, 2}));
    REQUIRE(view.has_value());
    CHECK(view->chosen == 0);
    CHECK(view->rejected == std::vector<int64_t>{1, 2, 3});
  }

  SUBCASE("ties with the top score are dropped from the rejected set") {
    const auto view = build_mn_view(record_with_scores({9, 9, 7, 2}));
    REQUIRE(view.has_value());
    CHECK(view->chosen == 0);
    CHECK(view->rejected == std::vector<int64_t>{2, 3});
  }

  SUBCASE("top appearing later still picks the first maximum") {
    const auto view = build_mn_view(record_with_scores({4, 9, 7, 9}));
    REQUIRE(view.has_value());
    CHECK(view->chosen == 1);
    CHECK(view->rejected == std::vector<int64_t>{0, 2});
  }

  SUBCASE("all tied yields nothing") {
    CHECK_FALSE(build_mn_view(record_with_scores({5, 5, 5})).has_value());
  }

  SUBCASE("fewer than two responses is an error") {
    CHECK_THROWS_AS(build_mn_view(record_with_scores({5})), Error);
  }
}

TEST_CASE("mc view enumeration") {
  SUBCASE("two tied plus one distinct gives 2 pairs") {
    const auto pairs = build_mc_view(record_with_scores({8, 8, 3}));
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].winner == 0);
    CHECK(pairs[0].loser == 2);
    CHECK(pairs[1].winner == 1);
    CHECK(pairs[1].loser == 2);
  }

  SUBCASE("four distinct scores give C(4,2) = 6 pairs") {
    CHECK(build_mc_view(record_with_scores({9, 7, 4, 2})).size() == 6);
  }

  SUBCASE("two distinct give one oriented pair") {
    const auto pairs = build_mc_view(record_with_scores({3, 8}));
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].winner == 1);
    CHECK(pairs[0].loser == 0);
  }

  SUBCASE("all tied gives none") {
    CHECK(build_mc_view(record_with_scores({5, 5, 5})).empty());
  }

  SUBCASE("brute force agreement for N+1 <= 6") {
    const std::vector<std::vector<double>> cases = {
        {1, 2},       {5, 5},          {9, 3, 7},          {9, 9, 9},
        {2, 2, 7, 7}, {1, 9, 5, 5, 3}, {4, 4, 4, 8, 2, 8},
    };
    for (const auto& scores : cases) {
      CAPTURE(scores.size());
      const auto record = record_with_scores(scores);
      const auto pairs = build_mc_view(record);
      size_t expect = 0;
      size_t cursor = 0;
      for (size_t i = 0; i < scores.size(); ++i)
        for (size_t j = i + 1; j < scores.size(); ++j) {
          if (scores[i] == scores[j]) continue;
          ++expect;
          REQUIRE(cursor < pairs.size());
          const auto& pair = pairs[cursor++];
          const auto w = static_cast<size_t>(pair.winner);
          const auto l = static_cast<size_t>(pair.loser);
          CHECK(std::set<size_t>{w, l} == std::set<size_t>{i, j});
          CHECK(scores[w] > scores[l]);
        }
      CHECK(pairs.size() == expect);
    }
  }
}

TEST_CASE("list view ordering") {
  SUBCASE("descending sort with original indices") {
    CHECK(build_list_view(record_with_scores({4, 9, 7, 2})) ==
          std::vector<int64_t>{1, 2, 0, 3});
  }
  SUBCASE("already sorted input is unchanged") {
    CHECK(build_list_view(record_with_scores({9, 7, 4})) ==
          std::vector<int64_t>{0, 1, 2});
  }
  SUBCASE("ties keep original order") {
    CHECK(build_list_view(record_with_scores({5, 5, 5})) ==
          std::vector<int64_t>{0, 1, 2});
    CHECK(build_list_view(record_with_scores({5, 9, 5})) ==
          std::vector<int64_t>{1, 0, 2});
  }
}

TEST_CASE("edit distance and ground-truth scoring") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("abc", "abc") == 0);
  CHECK(edit_distance("abc", "axc") == 1);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);

  GroundTruthScorer scorer{"abcd"};
  CHECK(scorer.score("abcd") == doctest::Approx(10.0));
  // distance 4 over max length 4: fully wrong -> bottom of the scale
  CHECK(scorer.score("wxyz") == doctest::Approx(1.0));
  // distance 1 over length 4 -> 1 + 9 * 0.75 = 7.75 -> rounded to 7.8
  CHECK(scorer.score("abcx") == doctest::Approx(7.8));
  for (const auto* response : {"", "ab", "abcdabcd", "zzzz"}) {
    const double s = scorer.score(response);
    CHECK(s >= 1.0);
    CHECK(s <= 10.0);
    CHECK(s * 10.0 == doctest::Approx(std::round(s * 10.0)));  // one decimal
  }
}

TEST_CASE("synthetic generator") {
  SUBCASE("counts and determinism") {
    const auto a = generate_synthetic(200, 4, 0.0, 12);
    const auto b = generate_synthetic(200, 4, 0.0, 12);
    REQUIRE(a.size() == 200);
    size_t responses = 0;
    for (const auto& record : a) responses += record.responses.size();
    CHECK(responses == 800);

    TempDir dir("gen");
    save_records(dir.path / "a.jsonl", a);
    save_records(dir.path / "b.jsonl", b);
    CHECK(read_file(dir.path / "a.jsonl") == read_file(dir.path / "b.jsonl"));

    const auto c = generate_synthetic(200, 4, 0.0, 13);
    save_records(dir.path / "c.jsonl", c);
    CHECK(read_file(dir.path / "a.jsonl") != read_file(dir.path / "c.jsonl"));
  }

  SUBCASE("noise-free scores are exactly the scorer's and max is 10") {
    const auto records = generate_synthetic(50, 4, 0.0, 3);
    for (const auto& record : records) {
      double best = 0.0;
      for (const auto& response : record.responses) {
        CHECK(response.raw_score >= 1.0);
        CHECK(response.raw_score <= 10.0);
        CHECK(response.norm_score ==
              doctest::Approx(response.raw_score / 10.0).epsilon(1e-12));
        best = std::max(best, response.raw_score);
      }
      CHECK(best == doctest::Approx(10.0));  // the clean reference is present
    }
  }

  SUBCASE("the reference lands at a uniformly random slot") {
    const auto records = generate_synthetic(400, 4, 0.0, 9);
    std::vector<int> slot_counts(4, 0);
    for (const auto& record : records) {
      for (size_t i = 0; i < record.responses.size(); ++i)
        if (record.responses[i].raw_score == 10.0) {
          ++slot_counts[i];
          break;
        }
    }
    for (int count : slot_counts) {
      CHECK(count > 60);  // 400/4 = 100 expected; far outside is a bug
      CHECK(count < 140);
    }
  }

  SUBCASE("noise moves scores but keeps them in range") {
    const auto noisy = generate_synthetic(50, 4, 1.0, 3);
    const auto clean = generate_synthetic(50, 4, 0.0, 3);
    bool any_difference = false;
    for (size_t r = 0; r < noisy.size(); ++r)
      for (const auto& response : noisy[r].responses) {
        CHECK(response.raw_score >= 1.0);
        CHECK(response.raw_score <= 10.0);
      }
    for (size_t r = 0; r < noisy.size(); ++r) {
      std::multiset<double> a, b;
      for (const auto& response : noisy[r].responses) a.insert(response.raw_score);
      for (const auto& response : clean[r].responses) b.insert(response.raw_score);
      if (a != b) any_difference = true;
    }
    CHECK(any_difference);
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(generate_synthetic(0, 4, 0.0, 1), Error);
    CHECK_THROWS_AS(generate_synthetic(5, 0, 0.0, 1), Error);
    CHECK_THROWS_AS(generate_synthetic(5, 4, -0.5, 1), Error);
    CHECK_NOTHROW(generate_synthetic(1, 1, 0.0, 1));
  }
}

TEST_CASE("jsonl round trip and validation") {
  TempDir dir("jsonl");

  SUBCASE("round trip preserves every field") {
    std::vector<PreferenceRecord> records = {record_with_scores({9, 2.5})};
    records[0].responses[0].text = "hello there";
    records[0].responses[1].text = "bye";
    save_records(dir.path / "r.jsonl", records);
    const auto loaded = load_records(dir.path / "r.jsonl");
    REQUIRE(loaded.size() == 1);
    REQUIRE(loaded[0].responses.size() == 2);
    CHECK(loaded[0].prompt == "q");
    CHECK(loaded[0].responses[0].text == "hello there");
    CHECK(loaded[0].responses[1].raw_score == doctest::Approx(2.5));
    CHECK(loaded[0].responses[1].norm_score ==
          doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("normalization is exactly raw over ten") {
    std::vector<PreferenceRecord> records = {record_with_scores({7.3, 1.0, 10.0})};
    save_records(dir.path / "n.jsonl", records);
    for (const auto& record : load_records(dir.path / "n.jsonl"))
      for (const auto& response : record.responses)
        CHECK(response.norm_score * 10.0 ==
              doctest::Approx(response.raw_score).epsilon(1e-12));
  }

  SUBCASE("empty file gives an empty corpus, blank lines are skipped") {
    write_file(dir.path / "e.jsonl", "");
    CHECK(load_records(dir.path / "e.jsonl").empty());
    write_file(dir.path / "blank.jsonl",
               "\n{\"prompt\":\"p\",\"responses\":[{\"text\":\"t\",\"score\":5}"
               ",{\"text\":\"u\",\"score\":3}]}\n\n");
    CHECK(load_records(dir.path / "blank.jsonl").size() == 1);
  }

  SUBCASE("malformed JSON reports the line number") {
    write_file(dir.path / "bad.jsonl",
               "{\"prompt\":\"p\",\"responses\":[{\"text\":\"t\",\"score\":5}]}\n"
               "{not json}\n");
    const std::string text =
        error_text([&] { load_records(dir.path / "bad.jsonl"); });
    CHECK(text.find(":2") != std::string::npos);
  }

  SUBCASE("score outside [1,10] is rejected with its line") {
    write_file(dir.path / "range.jsonl",
               "{\"prompt\":\"p\",\"responses\":[{\"text\":\"t\",\"score\":11}]}\n");
    const std::string text =
        error_text([&] { load_records(dir.path / "range.jsonl"); });
    CHECK(text.find("score out of range [1,10]") != std::string::npos);
    CHECK(text.find(":1") != std::string::npos);

    write_file(dir.path / "low.jsonl",
               "{\"prompt\":\"p\",\"responses\":[{\"text\":\"t\",\"score\":0.5}]}\n");
    CHECK_THROWS_AS(load_records(dir.path / "low.jsonl"), Error);
  }

  SUBCASE("structural problems are rejected") {
    write_file(dir.path / "s1.jsonl", "{\"responses\":[]}\n");
    CHECK_THROWS_AS(load_records(dir.path / "s1.jsonl"), Error);
    write_file(dir.path / "s2.jsonl", "{\"prompt\":\"p\",\"responses\":[]}\n");
    CHECK_THROWS_AS(load_records(dir.path / "s2.jsonl"), Error);
    write_file(dir.path / "s3.jsonl",
               "{\"prompt\":\"p\",\"responses\":[{\"text\":\"\",\"score\":5}]}\n");
    CHECK_THROWS_AS(load_records(dir.path / "s3.jsonl"), Error);
    write_file(dir.path / "s4.jsonl",
               "{\"prompt\":\"p\",\"responses\":[{\"score\":5}]}\n");
    CHECK_THROWS_AS(load_records(dir.path / "s4.jsonl"), Error);
    CHECK_THROWS_AS(load_records(dir.path / "missing.jsonl"), Error);
  }
}
