#pragma once

#include <string>
#include <vector>

#include "prefopt/grad_check.hpp"
#include "prefopt/rng.hpp"
#include "prefopt/tape.hpp"

namespace prefopt {

// Inputs to the loss family. Rewards p are scalar tensors in (0,1] (geometric
// mean token likelihoods); scores are ground-truth preferences normalized to
// [0.1, 1]. The DPO baseline instead consumes summed sequence log-likelihoods.

struct ScoredItem {
  ad::Tensor p;
  double score = 0.0;  // normalized, in [0.1, 1]
};

struct PairBatch {
  ad::Tensor p_w;                // chosen reward
  std::vector<ad::Tensor> p_l;   // rejected rewards, N >= 1
};

struct RankedList {
  std::vector<ad::Tensor> items;  // rewards in descending preference order
};

// Pointwise regression of p onto the normalized score.
ad::Tensor point_ce(ad::Tape& tape, const ScoredItem& item);
ad::Tensor point_mse(ad::Tape& tape, const ScoredItem& item);

// -log sigma(p_w - p_l), the Bradley-Terry pair objective in stable form.
ad::Tensor pair_single(ad::Tape& tape, const ad::Tensor& p_w, const ad::Tensor& p_l);

// Chosen vs every rejected: separate terms vs one merged sigmoid argument.
ad::Tensor pair_mns(ad::Tape& tape, const PairBatch& batch);
ad::Tensor pair_mnm(ad::Tape& tape, const PairBatch& batch);

// All score-distinct unordered pairs, each oriented higher-score-first.
ad::Tensor pair_mcs(ad::Tape& tape, const std::vector<ScoredItem>& items);
ad::Tensor pair_mcm(ad::Tape& tape, const std::vector<ScoredItem>& items);

// Plackett-Luce likelihood of the given ranking over rewards.
ad::Tensor list_mle(ad::Tape& tape, const RankedList& ranked);

// -log sigma(beta(logp_w - ref_logp_w) - beta(logp_l - ref_logp_l)) over
// summed (not averaged) sequence log-likelihoods.
ad::Tensor dpo_baseline(ad::Tape& tape, const ad::Tensor& logp_w,
                        const ad::Tensor& logp_l, const ad::Tensor& ref_logp_w,
                        const ad::Tensor& ref_logp_l, double beta);

// Stable string identifiers for variant selection.
enum class LossKind {
  point_ce,
  point_mse,
  pair_single,
  pair_mns,
  pair_mnm,
  pair_mcs,
  pair_mcm,
  list_mle,
  dpo,
};

const std::vector<std::string>& loss_ids();
std::string loss_id(LossKind kind);
LossKind loss_from_id(const std::string& id);

// Finite-difference check of one variant's loss surface at a random interior
// point. Scores, references, and beta stay fixed; the probed coordinates are
// the reward inputs (summed log-likelihoods for dpo).
ad::GradCheckReport grad_check_loss(LossKind kind, Rng& rng, double eps,
                                    double tol);

}  // namespace prefopt
