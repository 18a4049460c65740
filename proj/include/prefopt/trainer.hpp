#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prefopt/data.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/model.hpp"

namespace prefopt {

// Batch-gradient execution mode. Both modes compute one gradient per task
// into a private buffer and reduce the buffers in task order, so their
// results are bit-identical regardless of thread count; `serial` is the
// plain-loop reference, `parallel` fans the per-task work out over OpenMP.
enum class GradMode { serial, parallel };
enum class OptimKind { sgd, adam };

std::string grad_mode_name(GradMode mode);
GradMode grad_mode_from_name(const std::string& name);
std::string optim_name(OptimKind kind);
OptimKind optim_from_name(const std::string& name);

double default_learning_rate(Arch arch);

struct TrainConfig {
  LossKind variant = LossKind::pair_mnm;
  Arch arch = Arch::bigram;
  int64_t embed_dim = 16;
  int64_t hidden_dim = 32;
  int64_t context_len = 64;
  double learning_rate = 0.0;  // 0 selects the architecture default
  int64_t steps = 2000;
  int64_t batch_size = 16;
  uint64_t seed = 0;
  OptimKind optimizer = OptimKind::adam;
  GradMode grad_mode = GradMode::serial;
  std::optional<double> dpo_beta;  // required for dpo, rejected otherwise
};

// One row per optimization step. Slot s holds the mean likelihood of each
// record's rank-(s+1) rejected response (responses ordered by descending
// score), mirroring the per-response curves of the training diagnostics.
struct MetricsRow {
  int64_t step = 0;
  double loss = 0.0;
  double p_chosen_mean = 0.0;
  double p_rejected_mean = 0.0;
  double margin = 0.0;
  double lr = 0.0;
  std::vector<double> p_rejected_slots;
};

struct MetricsLog {
  int64_t num_slots = 0;
  std::vector<MetricsRow> rows;

  static std::string header_for(int64_t num_slots);
  std::string header() const { return header_for(num_slots); }
  static std::string row_csv(const MetricsRow& row);
  std::string to_csv() const;
};

using RowCallback = std::function<void(const MetricsRow&)>;

struct TrainResult {
  PolicyModel model;
  Vocab vocab;
  MetricsLog log;
  int64_t skipped_records = 0;
};

// Runs the optimization loop. Deterministic given (config, dataset): model
// init, epoch shuffling, and negative sampling draw from named substreams of
// config.seed. `on_row` (optional) observes each metrics row as it is
// produced, for streaming CSV output.
TrainResult train(const TrainConfig& config,
                  const std::vector<PreferenceRecord>& dataset,
                  const RowCallback& on_row = {});

struct RankingReport {
  double top1_acc = 0.0;
  double concordance = 0.0;
  int64_t evaluated = 0;  // records with a unique top score
  int64_t skipped = 0;
};

// Top-1 accuracy: fraction of evaluable records whose top-scored response
// also has the highest reward p. Concordance: fraction of distinct-score
// response pairs whose p-ordering agrees with their score-ordering.
RankingReport eval_ranking(const PolicyModel& model, const Vocab& vocab,
                           const std::vector<PreferenceRecord>& records);

struct VariantRow {
  std::string variant;
  double final_loss = 0.0;
  double final_margin = 0.0;
  double top1_acc = 0.0;
  double concordance = 0.0;
};

// Trains each config on the same dataset (all configs must share one seed)
// and reports final loss/margin plus ranking quality per variant.
std::vector<VariantRow> compare_variants(
    const std::vector<TrainConfig>& configs,
    const std::vector<PreferenceRecord>& dataset);

std::string comparison_csv(const std::vector<VariantRow>& rows);

}  // namespace prefopt
