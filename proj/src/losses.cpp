#include "prefopt/losses.hpp"

#include "prefopt/error.hpp"

namespace prefopt {

namespace {

void require_scalar(const ad::Tensor& t, const char* what) {
  if (!t.defined() || t.numel() != 1)
    fail(ErrKind::shape, what, " must be a scalar tensor");
}

void require_score(double score, const char* what) {
  if (!(score >= 0.1 && score <= 1.0))
    fail(ErrKind::value, what, ": score ", score, " outside [0.1, 1]");
}

// -log sigma(a - b) without constructing intermediate probabilities.
ad::Tensor bt_term(ad::Tape& tape, const ad::Tensor& a, const ad::Tensor& b) {
  return tape.neg(tape.log_sigmoid(tape.sub(a, b)));
}

// Index pairs (i, j), i < j, with distinct scores, oriented winner-first.
std::vector<std::pair<size_t, size_t>> oriented_pairs(
    const std::vector<ScoredItem>& items, const char* what) {
  if (items.size() < 2)
    fail(ErrKind::value, what, ": needs at least 2 items, got ", items.size());
  for (const auto& it : items) {
    require_scalar(it.p, what);
    require_score(it.score, what);
  }
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i + 1 < items.size(); ++i)
    for (size_t j = i + 1; j < items.size(); ++j) {
      if (items[i].score == items[j].score) continue;
      if (items[i].score > items[j].score) pairs.emplace_back(i, j);
      else pairs.emplace_back(j, i);
    }
  if (pairs.empty())
    fail(ErrKind::value, what, ": all scores equal, no orderable pair");
  return pairs;
}

}  // namespace

ad::Tensor point_ce(ad::Tape& tape, const ScoredItem& item) {
  require_scalar(item.p, "point-ce");
  require_score(item.score, "point-ce");
  const double p = item.p.values()[0];
  if (!(p > 0.0 && p < 1.0))
    fail(ErrKind::domain, "point-ce: p must lie strictly inside (0,1), got ", p);
  ad::Tensor log_p = tape.log(item.p);
  ad::Tensor log_1mp = tape.log(tape.add_const(tape.neg(item.p), 1.0));
  return tape.neg(tape.add(tape.scale(log_p, item.score),
                           tape.scale(log_1mp, 1.0 - item.score)));
}

ad::Tensor point_mse(ad::Tape& tape, const ScoredItem& item) {
  require_scalar(item.p, "point-mse");
  require_score(item.score, "point-mse");
  return tape.pow(tape.add_const(tape.neg(item.p), item.score), 2.0);
}

ad::Tensor pair_single(ad::Tape& tape, const ad::Tensor& p_w, const ad::Tensor& p_l) {
  require_scalar(p_w, "pair-single");
  require_scalar(p_l, "pair-single");
  return bt_term(tape, p_w, p_l);
}

ad::Tensor pair_mns(ad::Tape& tape, const PairBatch& batch) {
  require_scalar(batch.p_w, "pair-mns");
  if (batch.p_l.empty()) fail(ErrKind::value, "pair-mns: empty rejected list");
  ad::Tensor loss;
  for (const ad::Tensor& p_l : batch.p_l) {
    require_scalar(p_l, "pair-mns");
    ad::Tensor term = bt_term(tape, batch.p_w, p_l);
    loss = loss.defined() ? tape.add(loss, term) : term;
  }
  return loss;
}

ad::Tensor pair_mnm(ad::Tape& tape, const PairBatch& batch) {
  require_scalar(batch.p_w, "pair-mnm");
  if (batch.p_l.empty()) fail(ErrKind::value, "pair-mnm: empty rejected list");
  ad::Tensor rejected_sum;
  for (const ad::Tensor& p_l : batch.p_l) {
    require_scalar(p_l, "pair-mnm");
    rejected_sum = rejected_sum.defined() ? tape.add(rejected_sum, p_l) : p_l;
  }
  const double n = static_cast<double>(batch.p_l.size());
  ad::Tensor arg = tape.sub(tape.scale(batch.p_w, n), rejected_sum);
  return tape.neg(tape.log_sigmoid(arg));
}

ad::Tensor pair_mcs(ad::Tape& tape, const std::vector<ScoredItem>& items) {
  ad::Tensor loss;
  for (auto [w, l] : oriented_pairs(items, "pair-mcs")) {
    ad::Tensor term = bt_term(tape, items[w].p, items[l].p);
    loss = loss.defined() ? tape.add(loss, term) : term;
  }
  return loss;
}

ad::Tensor pair_mcm(ad::Tape& tape, const std::vector<ScoredItem>& items) {
  ad::Tensor arg;
  for (auto [w, l] : oriented_pairs(items, "pair-mcm")) {
    ad::Tensor margin = tape.sub(items[w].p, items[l].p);
    arg = arg.defined() ? tape.add(arg, margin) : margin;
  }
  return tape.neg(tape.log_sigmoid(arg));
}

ad::Tensor list_mle(ad::Tape& tape, const RankedList& ranked) {
  if (ranked.items.empty()) fail(ErrKind::value, "list-mle: empty list");
  const size_t n = ranked.items.size();
  std::vector<ad::Tensor> exps(n);
  for (size_t i = 0; i < n; ++i) {
    require_scalar(ranked.items[i], "list-mle");
    exps[i] = tape.exp(ranked.items[i]);
  }
  // Suffix sums of exp(p_j), built right to left.
  std::vector<ad::Tensor> suffix(n);
  suffix[n - 1] = exps[n - 1];
  for (size_t i = n - 1; i-- > 0;) suffix[i] = tape.add(exps[i], suffix[i + 1]);
  ad::Tensor loss;
  for (size_t i = 0; i < n; ++i) {
    ad::Tensor term = tape.sub(tape.log(suffix[i]), ranked.items[i]);
    loss = loss.defined() ? tape.add(loss, term) : term;
  }
  return loss;
}

ad::Tensor dpo_baseline(ad::Tape& tape, const ad::Tensor& logp_w,
                        const ad::Tensor& logp_l, const ad::Tensor& ref_logp_w,
                        const ad::Tensor& ref_logp_l, double beta) {
  if (!(beta > 0.0)) fail(ErrKind::value, "dpo: beta must be > 0, got ", beta);
  require_scalar(logp_w, "dpo");
  require_scalar(logp_l, "dpo");
  require_scalar(ref_logp_w, "dpo");
  require_scalar(ref_logp_l, "dpo");
  ad::Tensor arg = tape.scale(tape.sub(tape.sub(logp_w, ref_logp_w),
                                       tape.sub(logp_l, ref_logp_l)),
                              beta);
  return tape.neg(tape.log_sigmoid(arg));
}

const std::vector<std::string>& loss_ids() {
  static const std::vector<std::string> ids = {
      "point-ce", "point-mse", "pair-single", "pair-mns", "pair-mnm",
      "pair-mcs", "pair-mcm", "list-mle",    "dpo",
  };
  return ids;
}

std::string loss_id(LossKind kind) {
  return loss_ids()[static_cast<size_t>(kind)];
}

LossKind loss_from_id(const std::string& id) {
  const auto& ids = loss_ids();
  for (size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return static_cast<LossKind>(i);
  std::string valid;
  for (const auto& v : ids) {
    if (!valid.empty()) valid += ", ";
    valid += v;
  }
  fail(ErrKind::value, "unknown loss variant '", id, "' (valid: ", valid, ")");
}

namespace {

// Scalar views of the coordinates of a (k,) point tensor, on the tape.
std::vector<ad::Tensor> split_coords(ad::Tape& tape, const ad::Tensor& point) {
  ad::Tensor column = tape.reshape(point, {point.numel(), 1});
  std::vector<ad::Tensor> coords;
  for (int64_t i = 0; i < point.numel(); ++i)
    coords.push_back(tape.reshape(tape.gather_rows(column, {i}), {1}));
  return coords;
}

ad::Tensor random_interior_point(Rng& rng, int64_t n) {
  std::vector<double> values(static_cast<size_t>(n));
  for (double& v : values) v = rng.uniform(0.05, 0.95);
  return ad::Tensor::leaf({n}, std::move(values), /*requires_grad=*/true);
}

}  // namespace

ad::GradCheckReport grad_check_loss(LossKind kind, Rng& rng, double eps,
                                    double tol) {
  switch (kind) {
    case LossKind::point_ce:
    case LossKind::point_mse: {
      const double score = rng.uniform(0.1, 1.0);
      auto f = [kind, score](ad::Tape& tape, const ad::Tensor& x) {
        ScoredItem item{split_coords(tape, x)[0], score};
        return kind == LossKind::point_ce ? point_ce(tape, item)
                                          : point_mse(tape, item);
      };
      return ad::grad_check(f, random_interior_point(rng, 1), eps, tol);
    }
    case LossKind::pair_single: {
      auto f = [](ad::Tape& tape, const ad::Tensor& x) {
        auto c = split_coords(tape, x);
        return pair_single(tape, c[0], c[1]);
      };
      return ad::grad_check(f, random_interior_point(rng, 2), eps, tol);
    }
    case LossKind::pair_mns:
    case LossKind::pair_mnm: {
      auto f = [kind](ad::Tape& tape, const ad::Tensor& x) {
        auto c = split_coords(tape, x);
        PairBatch batch{c[0], {c.begin() + 1, c.end()}};
        return kind == LossKind::pair_mns ? pair_mns(tape, batch)
                                          : pair_mnm(tape, batch);
      };
      return ad::grad_check(f, random_interior_point(rng, 4), eps, tol);
    }
    case LossKind::pair_mcs:
    case LossKind::pair_mcm: {
      std::vector<double> scores = {0.2, 0.4, 0.7, 0.9};
      rng.shuffle(scores);
      auto f = [kind, scores](ad::Tape& tape, const ad::Tensor& x) {
        auto c = split_coords(tape, x);
        std::vector<ScoredItem> items;
        for (size_t i = 0; i < c.size(); ++i) items.push_back({c[i], scores[i]});
        return kind == LossKind::pair_mcs ? pair_mcs(tape, items)
                                          : pair_mcm(tape, items);
      };
      return ad::grad_check(f, random_interior_point(rng, 4), eps, tol);
    }
    case LossKind::list_mle: {
      auto f = [](ad::Tape& tape, const ad::Tensor& x) {
        return list_mle(tape, RankedList{split_coords(tape, x)});
      };
      return ad::grad_check(f, random_interior_point(rng, 4), eps, tol);
    }
    case LossKind::dpo: {
      const double ref_w = rng.uniform(-8.0, -1.0);
      const double ref_l = rng.uniform(-8.0, -1.0);
      auto f = [ref_w, ref_l](ad::Tape& tape, const ad::Tensor& x) {
        auto c = split_coords(tape, x);
        return dpo_baseline(tape, c[0], c[1], ad::Tensor::scalar(ref_w),
                            ad::Tensor::scalar(ref_l), 0.1);
      };
      std::vector<double> values = {rng.uniform(-8.0, -1.0),
                                    rng.uniform(-8.0, -1.0)};
      return ad::grad_check(
          f, ad::Tensor::leaf({2}, std::move(values), /*requires_grad=*/true),
          eps, tol);
    }
  }
  fail(ErrKind::value, "grad_check_loss: unknown variant");
}

}  // namespace prefopt
