#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/rng.hpp"
#include "prefopt/tape.hpp"
#include "prefopt/vocab.hpp"

namespace prefopt {

enum class Arch { bigram, mlp, transformer1 };

std::string arch_name(Arch arch);
Arch arch_from_name(const std::string& name);

struct ModelConfig {
  Arch arch = Arch::bigram;
  int64_t vocab_size = 0;
  int64_t embed_dim = 16;
  int64_t hidden_dim = 32;
  int64_t context_len = 64;
};

// Autoregressive policy over token ids. Three architectures share the
// interface: a bigram table (exactly hand-computable), a one-hidden-layer
// MLP over a fixed window of the last kMlpWindow tokens, and a single-block
// single-head transformer. The reward of a response is the geometric mean
// of its per-token likelihoods, computed in log space.
class PolicyModel {
 public:
  static constexpr int64_t kMlpWindow = 8;

  PolicyModel(ModelConfig config, Rng& init_rng);
  static PolicyModel from_params(
      ModelConfig config,
      const std::vector<std::pair<std::string, std::vector<double>>>& values);

  PolicyModel(PolicyModel&&) = default;
  PolicyModel& operator=(PolicyModel&&) = default;
  PolicyModel(const PolicyModel&) = delete;
  PolicyModel& operator=(const PolicyModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const std::vector<std::pair<std::string, ad::Tensor>>& params() const {
    return params_;
  }
  int64_t param_count() const;

  // Worker view: value buffers shared with this model, private gradients.
  PolicyModel shared_value_clone(bool requires_grad) const;
  // Frozen snapshot with copied values (reference model for the DPO baseline).
  PolicyModel deep_copy(bool requires_grad) const;

  // Per-response-token log pi(y_i | x, y_<i), shape (|y|,). Prompt tokens are
  // conditioned on but contribute no positions.
  ad::Tensor forward_logprobs(ad::Tape& tape, const TokenSequence& seq) const;
  // Geometric-mean token likelihood p = exp(mean log pi), a scalar in (0,1].
  ad::Tensor avg_likelihood(ad::Tape& tape, const TokenSequence& seq) const;
  // Summed sequence log-likelihood (the DPO baseline's log pi(y|x)).
  ad::Tensor sum_logprob(ad::Tape& tape, const TokenSequence& seq) const;

  double avg_likelihood_value(const TokenSequence& seq) const;

  void zero_grad();
  std::vector<double> flat_grad() const;
  void add_flat_grad_to(std::vector<double>& acc) const;
  void set_flat_grad(std::span<const double> flat);

  void save(const std::filesystem::path& path, const Vocab& vocab) const;
  static std::pair<PolicyModel, Vocab> load(const std::filesystem::path& path);

 private:
  PolicyModel() = default;
  const ad::Tensor& param(const std::string& name) const;
  ad::Tensor forward_bigram(ad::Tape& tape, const std::vector<int64_t>& ids,
                            int64_t response_start) const;
  ad::Tensor forward_mlp(ad::Tape& tape, const std::vector<int64_t>& ids,
                         int64_t response_start) const;
  ad::Tensor forward_transformer(ad::Tape& tape, const std::vector<int64_t>& ids,
                                 int64_t response_start) const;

  ModelConfig config_;
  std::vector<std::pair<std::string, ad::Tensor>> params_;
};

}  // namespace prefopt
