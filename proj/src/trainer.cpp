#include "prefopt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "prefopt/error.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// One unit of batch work. Meaning depends on the variant: pointwise tasks
// carry (record, response); pair-single and dpo carry (record, chosen,
// rejected); the remaining variants use the whole record.
struct Task {
  int64_t record = 0;
  int64_t response = -1;
  int64_t chosen = -1;
  int64_t rejected = -1;
};

struct TrainerState {
  const TrainConfig& config;
  const std::vector<PreferenceRecord>& dataset;
  Vocab vocab;
  std::vector<std::vector<TokenSequence>> seqs;        // [record][response]
  std::vector<std::optional<MnView>> mn_views;         // pair variants
  std::vector<std::vector<int64_t>> list_orders;       // list-mle
  std::vector<char> usable;                            // per record
  std::vector<std::vector<double>> ref_logp;           // dpo reference
  double lr = 0.0;
};

bool variant_needs_mn(LossKind v) {
  return v == LossKind::pair_single || v == LossKind::pair_mns ||
         v == LossKind::pair_mnm || v == LossKind::dpo;
}

// Loss for one task on the given worker model, with gradients left in the
// worker's parameter grad buffers.
double run_task(const TrainerState& st, PolicyModel& worker, const Task& task) {
  worker.zero_grad();
  ad::Tape tape;
  const auto& rec = st.dataset[static_cast<size_t>(task.record)];
  const auto& seqs = st.seqs[static_cast<size_t>(task.record)];
  auto reward = [&](int64_t i) {
    return worker.avg_likelihood(tape, seqs[static_cast<size_t>(i)]);
  };

  ad::Tensor loss;
  switch (st.config.variant) {
    case LossKind::point_ce:
    case LossKind::point_mse: {
      ScoredItem item{reward(task.response),
                      rec.responses[static_cast<size_t>(task.response)].norm_score};
      loss = st.config.variant == LossKind::point_ce ? point_ce(tape, item)
                                                     : point_mse(tape, item);
      break;
    }
    case LossKind::pair_single:
      loss = pair_single(tape, reward(task.chosen), reward(task.rejected));
      break;
    case LossKind::pair_mns:
    case LossKind::pair_mnm: {
      const MnView& view = *st.mn_views[static_cast<size_t>(task.record)];
      PairBatch batch;
      batch.p_w = reward(view.chosen);
      for (int64_t r : view.rejected) batch.p_l.push_back(reward(r));
      loss = st.config.variant == LossKind::pair_mns ? pair_mns(tape, batch)
                                                     : pair_mnm(tape, batch);
      break;
    }
    case LossKind::pair_mcs:
    case LossKind::pair_mcm: {
      std::vector<ScoredItem> items;
      for (size_t i = 0; i < rec.responses.size(); ++i)
        items.push_back({reward(static_cast<int64_t>(i)),
                         rec.responses[i].norm_score});
      loss = st.config.variant == LossKind::pair_mcs ? pair_mcs(tape, items)
                                                     : pair_mcm(tape, items);
      break;
    }
    case LossKind::list_mle: {
      RankedList ranked;
      for (int64_t i : st.list_orders[static_cast<size_t>(task.record)])
        ranked.items.push_back(reward(i));
      loss = list_mle(tape, ranked);
      break;
    }
    case LossKind::dpo: {
      const auto& refs = st.ref_logp[static_cast<size_t>(task.record)];
      loss = dpo_baseline(
          tape, worker.sum_logprob(tape, seqs[static_cast<size_t>(task.chosen)]),
          worker.sum_logprob(tape, seqs[static_cast<size_t>(task.rejected)]),
          ad::Tensor::scalar(refs[static_cast<size_t>(task.chosen)]),
          ad::Tensor::scalar(refs[static_cast<size_t>(task.rejected)]),
          *st.config.dpo_beta);
      break;
    }
  }
  tape.backward(loss);
  return loss.item();
}

// Mean-loss gradient over the batch. Per-task gradients land in private
// buffers and are reduced in task order, so serial and parallel modes agree
// bit for bit.
double batch_gradient(const TrainerState& st, std::vector<PolicyModel>& workers,
                      const std::vector<Task>& tasks, int64_t step,
                      std::vector<double>& grad_out) {
  const size_t n = tasks.size();
  const size_t p = grad_out.size();
  std::vector<std::vector<double>> slots(n);
  std::vector<double> losses(n, 0.0);

  bool parallel = st.config.grad_mode == GradMode::parallel;
#ifndef _OPENMP
  parallel = false;  // reference path computes the identical reduction
#endif
  if (parallel) {
#ifdef _OPENMP
    std::exception_ptr first_error;
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < static_cast<int64_t>(n); ++t) {
      try {
        PolicyModel& worker =
            workers[static_cast<size_t>(omp_get_thread_num())];
        losses[static_cast<size_t>(t)] =
            run_task(st, worker, tasks[static_cast<size_t>(t)]);
        slots[static_cast<size_t>(t)] = worker.flat_grad();
      } catch (...) {
#pragma omp critical
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
#endif
  } else {
    PolicyModel& worker = workers.front();
    for (size_t t = 0; t < n; ++t) {
      losses[t] = run_task(st, worker, tasks[t]);
      slots[t] = worker.flat_grad();
    }
  }

  for (size_t t = 0; t < n; ++t)
    if (!std::isfinite(losses[t]))
      fail(ErrKind::value, "non-finite loss at step ", step, " on record ",
           tasks[t].record);

  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  for (size_t t = 0; t < n; ++t)
    for (size_t k = 0; k < p; ++k) grad_out[k] += slots[t][k];
  const double inv = 1.0 / static_cast<double>(n);
  for (double& g : grad_out) g *= inv;

  double loss_sum = 0.0;
  for (double l : losses) loss_sum += l;
  return loss_sum * inv;
}

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;
};

void apply_update(PolicyModel& model, const std::vector<double>& grad, double lr,
                  OptimKind kind, AdamState& adam) {
  size_t k = 0;
  if (kind == OptimKind::sgd) {
    for (const auto& [name, tensor] : model.params()) {
      ad::Tensor h = tensor;
      for (double& w : h.mutable_values()) w -= lr * grad[k++];
    }
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  adam.t += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  for (const auto& [name, tensor] : model.params()) {
    ad::Tensor h = tensor;
    for (double& w : h.mutable_values()) {
      const double g = grad[k];
      adam.m[k] = b1 * adam.m[k] + (1.0 - b1) * g;
      adam.v[k] = b2 * adam.v[k] + (1.0 - b2) * g * g;
      w -= lr * (adam.m[k] / c1) / (std::sqrt(adam.v[k] / c2) + eps);
      ++k;
    }
  }
}

// Full-corpus likelihood diagnostics. Chosen = lowest-index top-score
// response; rejected slots are the rest ordered by descending score (stable
// on ties). Records contribute to every slot they actually have.
MetricsRow corpus_metrics(const TrainerState& st, const PolicyModel& probe,
                          int64_t step, double batch_loss, int64_t num_slots) {
  MetricsRow row;
  row.step = step;
  row.loss = batch_loss;
  row.lr = st.lr;
  row.p_rejected_slots.assign(static_cast<size_t>(num_slots), 0.0);
  std::vector<int64_t> slot_n(static_cast<size_t>(num_slots), 0);
  double chosen_sum = 0.0, rejected_sum = 0.0;
  int64_t chosen_n = 0, rejected_n = 0;

  for (size_t r = 0; r < st.dataset.size(); ++r) {
    const auto& rec = st.dataset[r];
    std::vector<double> ps(rec.responses.size());
    for (size_t i = 0; i < rec.responses.size(); ++i)
      ps[i] = probe.avg_likelihood_value(st.seqs[r][i]);

    std::vector<int64_t> order = build_list_view(rec);
    const size_t chosen = static_cast<size_t>(order.front());
    chosen_sum += ps[chosen];
    ++chosen_n;
    for (size_t s = 1; s < order.size(); ++s) {
      const double p = ps[static_cast<size_t>(order[s])];
      row.p_rejected_slots[s - 1] += p;
      ++slot_n[s - 1];
      rejected_sum += p;
      ++rejected_n;
    }
  }

  row.p_chosen_mean = chosen_n > 0 ? chosen_sum / static_cast<double>(chosen_n) : 0.0;
  row.p_rejected_mean =
      rejected_n > 0 ? rejected_sum / static_cast<double>(rejected_n) : 0.0;
  row.margin = row.p_chosen_mean - row.p_rejected_mean;
  for (size_t s = 0; s < row.p_rejected_slots.size(); ++s)
    if (slot_n[s] > 0) row.p_rejected_slots[s] /= static_cast<double>(slot_n[s]);
  return row;
}

}  // namespace

std::string grad_mode_name(GradMode mode) {
  return mode == GradMode::serial ? "serial" : "parallel";
}

GradMode grad_mode_from_name(const std::string& name) {
  if (name == "serial") return GradMode::serial;
  if (name == "parallel") return GradMode::parallel;
  fail(ErrKind::value, "unknown grad mode '", name,
       "' (expected serial or parallel)");
}

std::string optim_name(OptimKind kind) {
  return kind == OptimKind::sgd ? "sgd" : "adam";
}

OptimKind optim_from_name(const std::string& name) {
  if (name == "sgd") return OptimKind::sgd;
  if (name == "adam") return OptimKind::adam;
  fail(ErrKind::value, "unknown optimizer '", name, "' (expected sgd or adam)");
}

double default_learning_rate(Arch arch) {
  return arch == Arch::bigram ? 1e-2 : 1e-3;
}

std::string MetricsLog::header_for(int64_t num_slots) {
  std::string h = "step,loss,p_chosen_mean,p_rejected_mean,margin,lr";
  for (int64_t s = 1; s <= num_slots; ++s) h += ",p_rejected_" + std::to_string(s);
  return h;
}

std::string MetricsLog::row_csv(const MetricsRow& row) {
  std::string line = std::to_string(row.step);
  for (double v : {row.loss, row.p_chosen_mean, row.p_rejected_mean, row.margin,
                   row.lr}) {
    line += ',';
    line += fmt_num(v);
  }
  for (double v : row.p_rejected_slots) {
    line += ',';
    line += fmt_num(v);
  }
  return line;
}

std::string MetricsLog::to_csv() const {
  std::string out = header() + "\n";
  for (const auto& row : rows) out += row_csv(row) + "\n";
  return out;
}

TrainResult train(const TrainConfig& config,
                  const std::vector<PreferenceRecord>& dataset,
                  const RowCallback& on_row) {
  if (config.steps < 1)
    fail(ErrKind::value, "train: steps must be >= 1, got ", config.steps);
  if (config.batch_size < 1)
    fail(ErrKind::value, "train: batch_size must be >= 1, got ", config.batch_size);
  if (config.learning_rate < 0.0)
    fail(ErrKind::value, "train: learning rate must be >= 0");
  if (config.variant == LossKind::dpo && !config.dpo_beta)
    fail(ErrKind::value, "train: dpo requires dpo_beta");
  if (config.variant != LossKind::dpo && config.dpo_beta)
    fail(ErrKind::value, "train: dpo_beta is only valid for the dpo variant");
  if (dataset.empty()) fail(ErrKind::value, "train: empty dataset");

  TrainerState st{config, dataset, Vocab(), {}, {}, {}, {}, {}, 0.0};
  st.lr = config.learning_rate > 0.0 ? config.learning_rate
                                     : default_learning_rate(config.arch);

  std::vector<std::string> texts;
  for (const auto& rec : dataset) {
    texts.push_back(rec.prompt);
    for (const auto& r : rec.responses) texts.push_back(r.text);
  }
  st.vocab = Vocab::build(texts);

  st.seqs.resize(dataset.size());
  for (size_t r = 0; r < dataset.size(); ++r)
    for (const auto& resp : dataset[r].responses)
      st.seqs[r].push_back(make_sequence(st.vocab, dataset[r].prompt, resp.text));

  // Per-record usability for the chosen variant, with skips counted.
  st.usable.assign(dataset.size(), 1);
  int64_t skipped = 0;
  if (variant_needs_mn(config.variant)) {
    st.mn_views.resize(dataset.size());
    for (size_t r = 0; r < dataset.size(); ++r) {
      st.mn_views[r] = dataset[r].responses.size() >= 2
                           ? build_mn_view(dataset[r])
                           : std::nullopt;
      st.usable[r] = st.mn_views[r].has_value();
    }
  } else if (config.variant == LossKind::pair_mcs ||
             config.variant == LossKind::pair_mcm) {
    for (size_t r = 0; r < dataset.size(); ++r)
      st.usable[r] = dataset[r].responses.size() >= 2 &&
                     !build_mc_view(dataset[r]).empty();
  } else if (config.variant == LossKind::list_mle) {
    st.list_orders.resize(dataset.size());
    for (size_t r = 0; r < dataset.size(); ++r) {
      st.usable[r] = dataset[r].responses.size() >= 2;
      if (st.usable[r]) st.list_orders[r] = build_list_view(dataset[r]);
    }
  }
  std::vector<int64_t> usable_records;
  for (size_t r = 0; r < dataset.size(); ++r) {
    if (st.usable[r]) usable_records.push_back(static_cast<int64_t>(r));
    else ++skipped;
  }
  if (skipped > 0)
    std::fprintf(stderr,
                 "train: skipped %lld of %zu records unusable for %s "
                 "(needs >= 2 responses with non-tied scores)\n",
                 static_cast<long long>(skipped), dataset.size(),
                 loss_id(config.variant).c_str());
  if (usable_records.empty())
    fail(ErrKind::value, "train: no usable records for variant ",
         loss_id(config.variant));

  ModelConfig mcfg{config.arch, st.vocab.size(), config.embed_dim,
                   config.hidden_dim, config.context_len};
  Rng init_rng = Rng::substream(config.seed, "init");
  PolicyModel model(mcfg, init_rng);

  // Frozen initial model as the dpo reference.
  if (config.variant == LossKind::dpo) {
    PolicyModel ref = model.deep_copy(false);
    st.ref_logp.resize(dataset.size());
    for (int64_t r : usable_records) {
      const auto& seqs = st.seqs[static_cast<size_t>(r)];
      auto& out = st.ref_logp[static_cast<size_t>(r)];
      out.resize(seqs.size());
      for (size_t i = 0; i < seqs.size(); ++i) {
        ad::Tape tape;
        out[i] = ref.sum_logprob(tape, seqs[i]).item();
      }
    }
  }

  std::vector<PolicyModel> workers;
  int worker_count = 1;
#ifdef _OPENMP
  if (config.grad_mode == GradMode::parallel) worker_count = omp_get_max_threads();
#endif
  for (int w = 0; w < worker_count; ++w)
    workers.push_back(model.shared_value_clone(true));
  PolicyModel probe = model.shared_value_clone(false);

  const int64_t pcount = model.param_count();
  std::vector<double> grad(static_cast<size_t>(pcount), 0.0);
  AdamState adam;
  if (config.optimizer == OptimKind::adam) {
    adam.m.assign(static_cast<size_t>(pcount), 0.0);
    adam.v.assign(static_cast<size_t>(pcount), 0.0);
  }

  Rng shuffle_rng = Rng::substream(config.seed, "shuffle");
  Rng negative_rng = Rng::substream(config.seed, "negatives");
  std::vector<Task> epoch;
  size_t cursor = 0;
  auto rebuild_epoch = [&] {
    epoch.clear();
    if (config.variant == LossKind::point_ce ||
        config.variant == LossKind::point_mse) {
      for (int64_t r : usable_records)
        for (size_t i = 0; i < dataset[static_cast<size_t>(r)].responses.size();
             ++i)
          epoch.push_back({r, static_cast<int64_t>(i), -1, -1});
    } else if (config.variant == LossKind::pair_single ||
               config.variant == LossKind::dpo) {
      for (int64_t r : usable_records) {
        const MnView& view = *st.mn_views[static_cast<size_t>(r)];
        const int64_t neg =
            view.rejected[negative_rng.below(view.rejected.size())];
        epoch.push_back({r, -1, view.chosen, neg});
      }
    } else {
      for (int64_t r : usable_records) epoch.push_back({r, -1, -1, -1});
    }
    shuffle_rng.shuffle(epoch);
    cursor = 0;
  };

  int64_t num_slots = 0;
  for (const auto& rec : dataset)
    num_slots = std::max(num_slots,
                         static_cast<int64_t>(rec.responses.size()) - 1);
  MetricsLog log;
  log.num_slots = num_slots;

  for (int64_t step = 1; step <= config.steps; ++step) {
    if (cursor >= epoch.size()) rebuild_epoch();
    const size_t take =
        std::min(static_cast<size_t>(config.batch_size), epoch.size() - cursor);
    std::vector<Task> batch(epoch.begin() + static_cast<int64_t>(cursor),
                            epoch.begin() + static_cast<int64_t>(cursor + take));
    cursor += take;

    const double batch_loss = batch_gradient(st, workers, batch, step, grad);
    apply_update(model, grad, st.lr, config.optimizer, adam);

    MetricsRow row = corpus_metrics(st, probe, step, batch_loss, num_slots);
    if (on_row) on_row(row);
    log.rows.push_back(std::move(row));
  }

  return {std::move(model), std::move(st.vocab), std::move(log), skipped};
}

RankingReport eval_ranking(const PolicyModel& model, const Vocab& vocab,
                           const std::vector<PreferenceRecord>& records) {
  PolicyModel probe = model.shared_value_clone(false);
  RankingReport report;
  int64_t top1_hits = 0;
  int64_t concordant = 0, compared = 0;

  for (const auto& rec : records) {
    if (rec.responses.size() < 2) {
      ++report.skipped;
      continue;
    }
    size_t best = 0;
    bool unique_top = true;
    for (size_t i = 1; i < rec.responses.size(); ++i) {
      if (rec.responses[i].raw_score > rec.responses[best].raw_score) {
        best = i;
        unique_top = true;
      } else if (rec.responses[i].raw_score == rec.responses[best].raw_score) {
        unique_top = false;
      }
    }
    if (!unique_top) {
      ++report.skipped;
      continue;
    }
    ++report.evaluated;

    std::vector<double> ps(rec.responses.size());
    for (size_t i = 0; i < rec.responses.size(); ++i)
      ps[i] = probe.avg_likelihood_value(
          make_sequence(vocab, rec.prompt, rec.responses[i].text));

    const size_t argmax =
        static_cast<size_t>(std::max_element(ps.begin(), ps.end()) - ps.begin());
    if (argmax == best) ++top1_hits;

    for (size_t i = 0; i + 1 < rec.responses.size(); ++i)
      for (size_t j = i + 1; j < rec.responses.size(); ++j) {
        const double ds = rec.responses[i].raw_score - rec.responses[j].raw_score;
        if (ds == 0.0) continue;
        ++compared;
        if (ds * (ps[i] - ps[j]) > 0.0) ++concordant;
      }
  }

  if (report.evaluated == 0)
    fail(ErrKind::value, "eval_ranking: no records with a unique top score");
  report.top1_acc =
      static_cast<double>(top1_hits) / static_cast<double>(report.evaluated);
  report.concordance =
      compared > 0 ? static_cast<double>(concordant) / static_cast<double>(compared)
                   : 0.0;
  return report;
}

std::vector<VariantRow> compare_variants(
    const std::vector<TrainConfig>& configs,
    const std::vector<PreferenceRecord>& dataset) {
  if (configs.empty()) fail(ErrKind::value, "compare_variants: no configs");
  for (const auto& cfg : configs)
    if (cfg.seed != configs.front().seed)
      fail(ErrKind::value, "compare_variants: all configs must share one seed");

  std::vector<VariantRow> rows;
  for (const auto& cfg : configs) {
    TrainResult result = train(cfg, dataset);
    RankingReport report = eval_ranking(result.model, result.vocab, dataset);
    const MetricsRow& last = result.log.rows.back();
    rows.push_back({loss_id(cfg.variant), last.loss, last.margin,
                    report.top1_acc, report.concordance});
  }
  return rows;
}

std::string comparison_csv(const std::vector<VariantRow>& rows) {
  std::string out = "variant,final_loss,final_margin,top1_acc,concordance\n";
  for (const auto& row : rows) {
    out += row.variant;
    for (double v :
         {row.final_loss, row.final_margin, row.top1_acc, row.concordance}) {
      out += ',';
      out += fmt_num(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace prefopt
