#include "prefopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "prefopt/error.hpp"

namespace prefopt {

namespace {

constexpr double kInitStd = 0.08;
constexpr double kMaskedLogit = -1e30;

std::vector<double> normal_init(Rng& rng, int64_t n, double stddev) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return v;
}

// Exact %a/strtod round trip keeps checkpoints bit-identical.
std::string double_to_hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double hex_to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    fail(ErrKind::io, "checkpoint: malformed float literal '", s, "'");
  return v;
}

}  // namespace

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::bigram: return "bigram";
    case Arch::mlp: return "mlp";
    case Arch::transformer1: return "transformer1";
  }
  fail(ErrKind::value, "arch_name: unknown arch");
}

Arch arch_from_name(const std::string& name) {
  if (name == "bigram") return Arch::bigram;
  if (name == "mlp") return Arch::mlp;
  if (name == "transformer1") return Arch::transformer1;
  fail(ErrKind::value, "unknown architecture '", name,
       "' (expected bigram, mlp, or transformer1)");
}

PolicyModel::PolicyModel(ModelConfig config, Rng& init_rng) {
  config_ = config;
  const int64_t v = config.vocab_size;
  const int64_t d = config.embed_dim;
  const int64_t h = config.hidden_dim;
  if (v < 3) fail(ErrKind::value, "model: vocab_size must be >= 3, got ", v);
  if (d < 1 || h < 1 || config.context_len < 1)
    fail(ErrKind::value, "model: dims must be positive");

  auto weight = [&](const std::string& name, std::vector<int64_t> shape) {
    params_.emplace_back(name, ad::Tensor::leaf(shape,
                                                normal_init(init_rng,
                                                            ad::shape_numel(shape),
                                                            kInitStd),
                                                /*requires_grad=*/true));
  };
  auto zeros = [&](const std::string& name, std::vector<int64_t> shape) {
    params_.emplace_back(name, ad::Tensor::zeros(shape, /*requires_grad=*/true));
  };

  switch (config.arch) {
    case Arch::bigram:
      // Zero logits give exactly uniform rows at init.
      zeros("table", {v, v});
      break;
    case Arch::mlp:
      weight("embed", {v, d});
      weight("w1", {kMlpWindow * d, h});
      zeros("b1", {h});
      weight("w2", {h, v});
      zeros("b2", {v});
      break;
    case Arch::transformer1:
      weight("tok_emb", {v, d});
      weight("pos_emb", {config.context_len + 1, d});
      weight("wq", {d, d});
      weight("wk", {d, d});
      weight("wv", {d, d});
      weight("wo", {d, d});
      weight("mlp_w1", {d, h});
      zeros("mlp_b1", {h});
      weight("mlp_w2", {h, d});
      zeros("mlp_b2", {d});
      weight("head", {d, v});
      break;
  }
}

PolicyModel PolicyModel::from_params(
    ModelConfig config,
    const std::vector<std::pair<std::string, std::vector<double>>>& values) {
  Rng dummy(0);
  PolicyModel model(config, dummy);
  if (values.size() != model.params_.size())
    fail(ErrKind::value, "model: expected ", model.params_.size(), " parameters, got ",
         values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    auto& [name, tensor] = model.params_[i];
    if (values[i].first != name)
      fail(ErrKind::value, "model: parameter ", i, " should be '", name, "', got '",
           values[i].first, "'");
    if (static_cast<int64_t>(values[i].second.size()) != tensor.numel())
      fail(ErrKind::value, "model: parameter '", name, "' expects ", tensor.numel(),
           " values, got ", values[i].second.size());
    std::copy(values[i].second.begin(), values[i].second.end(),
              tensor.mutable_values().begin());
  }
  return model;
}

int64_t PolicyModel::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

PolicyModel PolicyModel::shared_value_clone(bool requires_grad) const {
  PolicyModel clone;
  clone.config_ = config_;
  clone.params_.reserve(params_.size());
  for (const auto& [name, t] : params_)
    clone.params_.emplace_back(name, t.shared_value_clone(requires_grad));
  return clone;
}

PolicyModel PolicyModel::deep_copy(bool requires_grad) const {
  PolicyModel clone;
  clone.config_ = config_;
  clone.params_.reserve(params_.size());
  for (const auto& [name, t] : params_)
    clone.params_.emplace_back(name, t.deep_copy(requires_grad));
  return clone;
}

const ad::Tensor& PolicyModel::param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  fail(ErrKind::value, "model: no parameter '", name, "'");
}

ad::Tensor PolicyModel::forward_logprobs(ad::Tape& tape,
                                         const TokenSequence& seq) const {
  if (seq.response_ids.empty())
    fail(ErrKind::value, "forward_logprobs: empty response");
  const int64_t total =
      static_cast<int64_t>(seq.prompt_ids.size() + seq.response_ids.size());
  if (total > config_.context_len)
    fail(ErrKind::value, "forward_logprobs: sequence of ", total,
         " tokens exceeds context length ", config_.context_len);

  std::vector<int64_t> ids;
  ids.reserve(static_cast<size_t>(total) + 1);
  ids.push_back(Vocab::kBos);
  ids.insert(ids.end(), seq.prompt_ids.begin(), seq.prompt_ids.end());
  const int64_t response_start = static_cast<int64_t>(ids.size());
  ids.insert(ids.end(), seq.response_ids.begin(), seq.response_ids.end());
  for (int64_t id : ids)
    if (id < 0 || id >= config_.vocab_size)
      fail(ErrKind::value, "forward_logprobs: token id ", id, " out of range [0,",
           config_.vocab_size, ")");

  switch (config_.arch) {
    case Arch::bigram: return forward_bigram(tape, ids, response_start);
    case Arch::mlp: return forward_mlp(tape, ids, response_start);
    case Arch::transformer1: return forward_transformer(tape, ids, response_start);
  }
  fail(ErrKind::value, "forward_logprobs: unknown arch");
}

ad::Tensor PolicyModel::forward_bigram(ad::Tape& tape,
                                       const std::vector<int64_t>& ids,
                                       int64_t response_start) const {
  const int64_t n = static_cast<int64_t>(ids.size());
  // Conditioning token for each response position: last non-pad before it,
  // so padding the prompt leaves the prediction unchanged.
  std::vector<int64_t> prev;
  std::vector<int64_t> targets;
  for (int64_t t = response_start; t < n; ++t) {
    int64_t p = t - 1;
    while (p > 0 && ids[p] == Vocab::kPad) --p;
    prev.push_back(ids[p]);
    targets.push_back(ids[t]);
  }
  ad::Tensor rows = tape.gather_rows(param("table"), std::move(prev));
  return tape.select_cols(tape.log_softmax(rows), std::move(targets));
}

ad::Tensor PolicyModel::forward_mlp(ad::Tape& tape, const std::vector<int64_t>& ids,
                                    int64_t response_start) const {
  const int64_t n = static_cast<int64_t>(ids.size());
  const int64_t ny = n - response_start;
  const int64_t w = kMlpWindow;
  // Window of the last w ids before each response position, left-filled
  // with pad.
  std::vector<int64_t> window_ids;
  std::vector<int64_t> targets;
  window_ids.reserve(static_cast<size_t>(ny * w));
  for (int64_t t = response_start; t < n; ++t) {
    for (int64_t k = t - w; k < t; ++k)
      window_ids.push_back(k >= 0 ? ids[k] : Vocab::kPad);
    targets.push_back(ids[t]);
  }
  ad::Tensor emb = tape.gather_rows(param("embed"), std::move(window_ids));
  ad::Tensor flat = tape.reshape(emb, {ny, w * config_.embed_dim});
  ad::Tensor hidden =
      tape.tanh(tape.add_rowvec(tape.matmul(flat, param("w1")), param("b1")));
  ad::Tensor logits = tape.add_rowvec(tape.matmul(hidden, param("w2")), param("b2"));
  return tape.select_cols(tape.log_softmax(logits), std::move(targets));
}

ad::Tensor PolicyModel::forward_transformer(ad::Tape& tape,
                                            const std::vector<int64_t>& ids,
                                            int64_t response_start) const {
  const int64_t n = static_cast<int64_t>(ids.size());
  const int64_t d = config_.embed_dim;

  // Positions count only non-pad tokens; pad keys are masked out of every
  // attention row. Together these make prompt padding invisible.
  std::vector<int64_t> pos;
  pos.reserve(static_cast<size_t>(n));
  int64_t real = 0;
  for (int64_t i = 0; i < n; ++i) {
    pos.push_back(real);
    if (ids[i] != Vocab::kPad) ++real;
  }

  std::vector<double> mask_values(static_cast<size_t>(n * n), kMaskedLogit);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j <= i; ++j)
      if (ids[j] != Vocab::kPad) mask_values[i * n + j] = 0.0;
  ad::Tensor mask = ad::Tensor::leaf({n, n}, std::move(mask_values));

  ad::Tensor x = tape.add(tape.gather_rows(param("tok_emb"), ids),
                          tape.gather_rows(param("pos_emb"), std::move(pos)));
  ad::Tensor q = tape.matmul(x, param("wq"));
  ad::Tensor k = tape.matmul(x, param("wk"));
  ad::Tensor v = tape.matmul(x, param("wv"));
  ad::Tensor scores =
      tape.add(tape.scale(tape.matmul(q, tape.transpose(k)),
                          1.0 / std::sqrt(static_cast<double>(d))),
               mask);
  ad::Tensor attn = tape.exp(tape.log_softmax(scores));
  ad::Tensor x2 = tape.add(x, tape.matmul(tape.matmul(attn, v), param("wo")));
  ad::Tensor hidden = tape.tanh(
      tape.add_rowvec(tape.matmul(x2, param("mlp_w1")), param("mlp_b1")));
  ad::Tensor x3 = tape.add(
      x2, tape.add_rowvec(tape.matmul(hidden, param("mlp_w2")), param("mlp_b2")));
  ad::Tensor logp = tape.log_softmax(tape.matmul(x3, param("head")));

  std::vector<int64_t> predict_rows;
  std::vector<int64_t> targets;
  for (int64_t t = response_start; t < n; ++t) {
    predict_rows.push_back(t - 1);
    targets.push_back(ids[t]);
  }
  return tape.select_cols(tape.gather_rows(logp, std::move(predict_rows)),
                          std::move(targets));
}

ad::Tensor PolicyModel::avg_likelihood(ad::Tape& tape,
                                       const TokenSequence& seq) const {
  return tape.exp(tape.mean(forward_logprobs(tape, seq)));
}

ad::Tensor PolicyModel::sum_logprob(ad::Tape& tape, const TokenSequence& seq) const {
  return tape.sum(forward_logprobs(tape, seq));
}

double PolicyModel::avg_likelihood_value(const TokenSequence& seq) const {
  ad::Tape tape;
  return avg_likelihood(tape, seq).item();
}

void PolicyModel::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

std::vector<double> PolicyModel::flat_grad() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(param_count()));
  for (const auto& [name, t] : params_)
    flat.insert(flat.end(), t.grad().begin(), t.grad().end());
  return flat;
}

void PolicyModel::add_flat_grad_to(std::vector<double>& acc) const {
  if (static_cast<int64_t>(acc.size()) != param_count())
    fail(ErrKind::shape, "add_flat_grad_to: buffer has ", acc.size(),
         " entries, model has ", param_count());
  size_t k = 0;
  for (const auto& [name, t] : params_)
    for (double g : t.grad()) acc[k++] += g;
}

void PolicyModel::set_flat_grad(std::span<const double> flat) {
  if (static_cast<int64_t>(flat.size()) != param_count())
    fail(ErrKind::shape, "set_flat_grad: buffer has ", flat.size(),
         " entries, model has ", param_count());
  size_t k = 0;
  for (auto& [name, t] : params_)
    for (double& g : t.mutable_grad()) g = flat[k++];
}

void PolicyModel::save(const std::filesystem::path& path, const Vocab& vocab) const {
  nlohmann::json doc;
  doc["format"] = "prefopt-checkpoint";
  doc["version"] = 1;
  doc["model"] = {{"arch", arch_name(config_.arch)},
                  {"vocab_size", config_.vocab_size},
                  {"embed_dim", config_.embed_dim},
                  {"hidden_dim", config_.hidden_dim},
                  {"context_len", config_.context_len}};
  doc["vocab"] = vocab.symbols();
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : params_) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : t.values()) arr.push_back(double_to_hex(v));
    params[name] = std::move(arr);
  }
  doc["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) fail(ErrKind::io, "checkpoint: cannot write ", path.string());
  out << doc.dump(1) << "\n";
  if (!out) fail(ErrKind::io, "checkpoint: write failed for ", path.string());
}

std::pair<PolicyModel, Vocab> PolicyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrKind::io, "checkpoint: cannot open ", path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrKind::io, "checkpoint: invalid JSON in ", path.string(), ": ", e.what());
  }
  if (doc.value("format", "") != "prefopt-checkpoint")
    fail(ErrKind::io, "checkpoint: missing format header in ", path.string());
  if (doc.value("version", 0) != 1)
    fail(ErrKind::io, "checkpoint: unsupported version ", doc.value("version", 0));

  ModelConfig config;
  const auto& m = doc.at("model");
  config.arch = arch_from_name(m.at("arch").get<std::string>());
  config.vocab_size = m.at("vocab_size").get<int64_t>();
  config.embed_dim = m.at("embed_dim").get<int64_t>();
  config.hidden_dim = m.at("hidden_dim").get<int64_t>();
  config.context_len = m.at("context_len").get<int64_t>();

  Vocab vocab = Vocab::from_symbols(doc.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != config.vocab_size)
    fail(ErrKind::io, "checkpoint: vocab has ", vocab.size(), " symbols, config says ",
         config.vocab_size);

  std::vector<std::pair<std::string, std::vector<double>>> values;
  for (const auto& [name, arr] : doc.at("params").items()) {
    std::vector<double> vals;
    vals.reserve(arr.size());
    for (const auto& s : arr) vals.push_back(hex_to_double(s.get<std::string>()));
    values.emplace_back(name, std::move(vals));
  }
  // JSON object iteration is alphabetical; restore declaration order.
  Rng dummy(0);
  PolicyModel ordering(config, dummy);
  std::vector<std::pair<std::string, std::vector<double>>> ordered;
  for (const auto& [name, t] : ordering.params()) {
    auto it = std::find_if(values.begin(), values.end(),
                           [&](const auto& kv) { return kv.first == name; });
    if (it == values.end())
      fail(ErrKind::io, "checkpoint: missing parameter '", name, "'");
    ordered.emplace_back(name, std::move(it->second));
  }
  return {from_params(config, ordered), std::move(vocab)};
}

}  // namespace prefopt
