#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "prefopt/error.hpp"
#include "prefopt/model.hpp"

using namespace prefopt;

namespace {

Vocab tiny_vocab(const std::string& chars) {
  std::vector<std::string> texts = {chars};
  return Vocab::build(texts);
}

ModelConfig small_config(Arch arch, int64_t vocab_size) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.vocab_size = vocab_size;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 12;
  cfg.context_len = 32;
  return cfg;
}

PolicyModel make_model(Arch arch, int64_t vocab_size, uint64_t seed = 3) {
  Rng rng(seed);
  return PolicyModel(small_config(arch, vocab_size), rng);
}

double bits_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("prefopt_model_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("fresh bigram is uniform") {
  Vocab vocab = tiny_vocab("a");  // pad, bos, eos, 'a' -> V = 4
  REQUIRE(vocab.size() == 4);
  PolicyModel model = make_model(Arch::bigram, vocab.size());

  for (const std::string response : {"a", "aa", "aaaaa"}) {
    TokenSequence seq = make_sequence(vocab, "a", response);
    ad::Tape tape;
    ad::Tensor logprobs = model.forward_logprobs(tape, seq);
    REQUIRE(logprobs.numel() == static_cast<int64_t>(response.size()));
    for (double lp : logprobs.values())
      CHECK(lp == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
    CHECK(model.avg_likelihood_value(seq) ==
          doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("near-one-hot table drives logprobs to zero") {
  Vocab vocab = tiny_vocab("ab");  // V = 5, ids: a=3, b=4
  const int64_t v = vocab.size();
  // Huge logit on the observed successor: bos->a, a->b, b->a.
  std::vector<double> table(static_cast<size_t>(v * v), 0.0);
  table[static_cast<size_t>(Vocab::kBos * v + 3)] = 1000.0;
  table[static_cast<size_t>(3 * v + 4)] = 1000.0;
  table[static_cast<size_t>(4 * v + 3)] = 1000.0;

  PolicyModel model =
      PolicyModel::from_params(small_config(Arch::bigram, v), {{"table", table}});
  TokenSequence seq = make_sequence(vocab, "", "aba");
  ad::Tape tape;
  ad::Tensor logprobs = model.forward_logprobs(tape, seq);
  for (double lp : logprobs.values()) CHECK(lp == 0.0);
  CHECK(model.avg_likelihood_value(seq) == 1.0);
}

TEST_CASE("hand-set token probabilities give the geometric mean") {
  // Transitions bos->a, a->b, b->a carry probabilities 0.5, 0.5, 0.125; every
  // row is an exact power-of-two distribution so log_softmax(ln p) = ln p.
  Vocab vocab = tiny_vocab("ab");
  const int64_t v = vocab.size();
  std::vector<double> table(static_cast<size_t>(v * v));
  auto set_row = [&](int64_t row, int64_t target, double p_target) {
    const double rest = (1.0 - p_target) / static_cast<double>(v - 1);
    for (int64_t c = 0; c < v; ++c)
      table[static_cast<size_t>(row * v + c)] =
          std::log(c == target ? p_target : rest);
  };
  for (int64_t row = 0; row < v; ++row) set_row(row, 3, 0.5);
  set_row(Vocab::kBos, 3, 0.5);
  set_row(3, 4, 0.5);
  set_row(4, 3, 0.125);

  PolicyModel model =
      PolicyModel::from_params(small_config(Arch::bigram, v), {{"table", table}});
  TokenSequence seq = make_sequence(vocab, "", "aba");
  const double p = model.avg_likelihood_value(seq);
  CHECK(p == doctest::Approx(std::exp2(-5.0 / 3.0)).epsilon(1e-9));
  CHECK(p == doctest::Approx(0.314980262473718291).epsilon(1e-9));
}

TEST_CASE("per-position distributions are normalized") {
  // Directly sum p(v | prefix) over the whole vocabulary at two positions.
  Vocab vocab = tiny_vocab("abc");
  const int64_t v = vocab.size();
  for (Arch arch : {Arch::bigram, Arch::mlp, Arch::transformer1}) {
    CAPTURE(arch_name(arch));
    PolicyModel model = make_model(arch, v, 11);
    const std::vector<int64_t> prompt = vocab.encode("ab");
    for (const std::vector<int64_t> prefix :
         {std::vector<int64_t>{}, vocab.encode("ca")}) {
      double total = 0.0;
      for (int64_t id = 0; id < v; ++id) {
        TokenSequence seq;
        seq.prompt_ids = prompt;
        seq.response_ids = prefix;
        seq.response_ids.push_back(id);
        ad::Tape tape;
        ad::Tensor logprobs = model.forward_logprobs(tape, seq);
        const double last = logprobs.values()[logprobs.values().size() - 1];
        CHECK(std::exp(last) > 0.0);
        CHECK(std::exp(last) < 1.0);
        total += std::exp(last);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("reward equals the geometric mean of token likelihoods") {
  Vocab vocab = tiny_vocab("abc");
  for (Arch arch : {Arch::bigram, Arch::mlp, Arch::transformer1}) {
    CAPTURE(arch_name(arch));
    PolicyModel model = make_model(arch, vocab.size(), 5);
    TokenSequence seq = make_sequence(vocab, "ab", "cabc");
    ad::Tape tape;
    const auto lp = model.forward_logprobs(tape, seq).values();
    double product = 1.0;
    for (double x : lp) product *= std::exp(x);
    const double geo = std::pow(product, 1.0 / static_cast<double>(lp.size()));
    CHECK(model.avg_likelihood(tape, seq).item() ==
          doctest::Approx(geo).epsilon(1e-12));
    double total = 0.0;
    for (double x : lp) total += x;
    CHECK(model.sum_logprob(tape, seq).item() ==
          doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("causality: a later token cannot change earlier logprobs") {
  Vocab vocab = tiny_vocab("abc");
  for (Arch arch : {Arch::bigram, Arch::mlp, Arch::transformer1}) {
    CAPTURE(arch_name(arch));
    PolicyModel model = make_model(arch, vocab.size(), 9);
    TokenSequence one = make_sequence(vocab, "ab", "cbaa");
    TokenSequence two = make_sequence(vocab, "ab", "cbac");
    ad::Tape tape;
    const auto lp1 = model.forward_logprobs(tape, one).values();
    const auto lp2 = model.forward_logprobs(tape, two).values();
    REQUIRE(lp1.size() == lp2.size());
    for (size_t i = 0; i + 1 < lp1.size(); ++i) {
      CAPTURE(i);
      CHECK(std::abs(lp1[i] - lp2[i]) <= 1e-12);
    }
  }
}

TEST_CASE("mlp conditions on exactly its window") {
  // Two long responses differing only in a token that has scrolled out of the
  // 8-token window must give identical final-position logprobs.
  Vocab vocab = tiny_vocab("abc");
  PolicyModel model = make_model(Arch::mlp, vocab.size(), 13);
  std::string base = "abcabcabcabc";
  std::string changed = base;
  changed[2] = 'a';  // 9 positions before the final token
  REQUIRE(base.size() - 3 >= PolicyModel::kMlpWindow);
  TokenSequence one = make_sequence(vocab, "c", base);
  TokenSequence two = make_sequence(vocab, "c", changed);
  ad::Tape tape;
  const auto lp1 = model.forward_logprobs(tape, one).values();
  const auto lp2 = model.forward_logprobs(tape, two).values();
  CHECK(bits_equal(lp1[lp1.size() - 1], lp2[lp2.size() - 1]));
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Vocab vocab = tiny_vocab("abcde");
  for (Arch arch : {Arch::bigram, Arch::mlp, Arch::transformer1}) {
    CAPTURE(arch_name(arch));
    TempDir dir(std::string("ckpt_") + arch_name(arch));
    PolicyModel model = make_model(arch, vocab.size(), 21);
    const auto path = dir.path / "model.json";
    model.save(path, vocab);

    auto [loaded, loaded_vocab] = PolicyModel::load(path);
    CHECK(loaded_vocab.symbols() == vocab.symbols());
    CHECK(loaded.config().vocab_size == model.config().vocab_size);
    REQUIRE(loaded.params().size() == model.params().size());
    for (size_t i = 0; i < model.params().size(); ++i) {
      CHECK(loaded.params()[i].first == model.params()[i].first);
      const auto a = model.params()[i].second.values();
      const auto b = loaded.params()[i].second.values();
      REQUIRE(a.size() == b.size());
      for (size_t j = 0; j < a.size(); ++j) CHECK(bits_equal(a[j], b[j]));
    }

    TokenSequence seq = make_sequence(vocab, "ab", "cede");
    CHECK(bits_equal(model.avg_likelihood_value(seq),
                     loaded.avg_likelihood_value(seq)));
  }
}

TEST_CASE("worker clones share values but not gradients") {
  Vocab vocab = tiny_vocab("ab");
  PolicyModel model = make_model(Arch::bigram, vocab.size(), 2);
  PolicyModel worker = model.shared_value_clone(/*requires_grad=*/true);

  TokenSequence seq = make_sequence(vocab, "a", "ba");
  ad::Tape tape;
  ad::Tensor loss = tape.neg(tape.log(worker.avg_likelihood(tape, seq)));
  tape.backward(loss);

  const auto wg = worker.flat_grad();
  double norm = 0.0;
  for (double g : wg) norm += g * g;
  CHECK(norm > 0.0);
  for (double g : model.flat_grad()) CHECK(g == 0.0);

  // Same storage: a parameter write through the owner is visible to the worker.
  auto owner_values = model.params()[0].second.values();
  auto worker_values = worker.params()[0].second.values();
  CHECK(owner_values.data() == worker_values.data());

  PolicyModel frozen = model.deep_copy(/*requires_grad=*/false);
  CHECK(frozen.params()[0].second.values().data() != owner_values.data());
}

TEST_CASE("flat gradient round trip") {
  Vocab vocab = tiny_vocab("ab");
  PolicyModel model = make_model(Arch::mlp, vocab.size(), 8);
  PolicyModel worker = model.shared_value_clone(true);
  TokenSequence seq = make_sequence(vocab, "a", "bab");
  ad::Tape tape;
  tape.backward(tape.neg(worker.avg_likelihood(tape, seq)));

  const auto flat = worker.flat_grad();
  CHECK(static_cast<int64_t>(flat.size()) == model.param_count());

  std::vector<double> acc(flat.size(), 0.0);
  worker.add_flat_grad_to(acc);
  worker.add_flat_grad_to(acc);
  for (size_t i = 0; i < flat.size(); ++i)
    CHECK(acc[i] == doctest::Approx(2.0 * flat[i]));

  model.set_flat_grad(acc);
  CHECK(model.flat_grad() == acc);
  model.zero_grad();
  for (double g : model.flat_grad()) CHECK(g == 0.0);

  std::vector<double> wrong(flat.size() + 1, 0.0);
  CHECK_THROWS_AS(model.set_flat_grad(wrong), Error);
}

TEST_CASE("sequence and input validation") {
  Vocab vocab = tiny_vocab("ab");
  PolicyModel model = make_model(Arch::bigram, vocab.size());

  CHECK_THROWS_AS(make_sequence(vocab, "a", ""), Error);
  CHECK_THROWS_AS(vocab.encode("xyz"), Error);

  SUBCASE("over-long sequence is rejected") {
    const std::string long_response(40, 'a');  // context_len is 32
    TokenSequence seq = make_sequence(vocab, "a", long_response);
    ad::Tape tape;
    CHECK_THROWS_AS(model.forward_logprobs(tape, seq), Error);
  }

  SUBCASE("empty response is rejected at forward too") {
    TokenSequence seq;
    seq.prompt_ids = vocab.encode("a");
    ad::Tape tape;
    CHECK_THROWS_AS(model.forward_logprobs(tape, seq), Error);
  }

  SUBCASE("out-of-range token id is rejected") {
    TokenSequence seq;
    seq.prompt_ids = {3};
    seq.response_ids = {99};
    ad::Tape tape;
    CHECK_THROWS_AS(model.forward_logprobs(tape, seq), Error);
  }

  SUBCASE("from_params validates the parameter list") {
    const auto cfg = small_config(Arch::bigram, vocab.size());
    CHECK_THROWS_AS(PolicyModel::from_params(cfg, {{"wrong", {1.0}}}), Error);
    CHECK_THROWS_AS(PolicyModel::from_params(cfg, {{"table", {1.0, 2.0}}}),
                    Error);
  }

  SUBCASE("arch names round-trip and reject junk") {
    for (Arch arch : {Arch::bigram, Arch::mlp, Arch::transformer1})
      CHECK(arch_from_name(arch_name(arch)) == arch);
    CHECK_THROWS_AS(arch_from_name("gpt5"), Error);
  }
}
