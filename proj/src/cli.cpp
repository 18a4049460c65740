#include "prefopt/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefopt/data.hpp"
#include "prefopt/error.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/model.hpp"
#include "prefopt/svg_plot.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrKind::io, "cannot hash ", path.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrKind::io, "cannot write ", path.string());
  out << content;
  if (!out) fail(ErrKind::io, "write failed for ", path.string());
}

// Run record: command, effective configuration, and hashes of every input
// and output artifact. Written atomically (temp file + rename) at run end.
class ManifestBuilder {
 public:
  ManifestBuilder(std::string command, uint64_t seed) {
    doc_["version"] = 1;
    doc_["command"] = std::move(command);
    doc_["seed"] = seed;
    doc_["inputs"] = nlohmann::json::object();
    doc_["outputs"] = nlohmann::json::object();
  }

  void set_config(nlohmann::json config) { doc_["config"] = std::move(config); }

  void add_input(const std::filesystem::path& path) {
    doc_["inputs"][path.filename().string()] = {
        {"path", path.string()}, {"fnv1a64", hash_hex(fnv1a64_file(path))}};
  }

  void add_output(const std::filesystem::path& path) {
    doc_["outputs"][path.filename().string()] = {
        {"path", path.string()}, {"fnv1a64", hash_hex(fnv1a64_file(path))}};
  }

  void write(const std::filesystem::path& out_dir) {
    doc_["timestamp_utc"] = iso_utc_now();
    const auto final_path = out_dir / "manifest.json";
    const auto tmp_path = out_dir / "manifest.json.tmp";
    write_text(tmp_path, doc_.dump(1) + "\n");
    std::filesystem::rename(tmp_path, final_path);
  }

 private:
  nlohmann::json doc_;
};

// Optional JSON config file whose keys mirror long flag names; values apply
// only to flags the user did not pass, so the command line wins.
class ConfigMerge {
 public:
  template <class T>
  void bind(CLI::Option* opt, T& var) {
    setters_[opt->get_name(false, true)] = {opt, [&var](const nlohmann::json& v) {
                                              var = v.get<T>();
                                            }};
  }

  void apply(const std::string& config_path) const {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw UsageError(msg("cannot open config file ", config_path));
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(msg("invalid JSON in config file ", config_path, ": ",
                           e.what()));
    }
    if (!doc.is_object())
      throw UsageError(msg("config file ", config_path, " must hold an object"));
    for (const auto& [key, value] : doc.items()) {
      auto it = setters_.find("--" + key);
      if (it == setters_.end())
        throw UsageError(msg("unknown config key '", key, "' in ", config_path));
      if (it->second.option->count() > 0) continue;  // flag wins
      try {
        it->second.set(value);
      } catch (const nlohmann::json::exception&) {
        throw UsageError(msg("config key '", key, "' has the wrong type"));
      }
    }
  }

 private:
  struct Setter {
    CLI::Option* option;
    std::function<void(const nlohmann::json&)> set;
  };
  std::map<std::string, Setter> setters_;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

LossKind parse_variant(const std::string& id) {
  try {
    return loss_from_id(id);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

Arch parse_arch(const std::string& name) {
  try {
    return arch_from_name(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// Shared flags and assembly for commands that train models.
struct TrainFlags {
  std::string data;
  std::string arch = "bigram";
  std::string optimizer = "adam";
  std::string grad_mode = "serial";
  int64_t steps = 2000;
  int64_t batch_size = 16;
  int64_t embed_dim = 16;
  int64_t hidden_dim = 32;
  int64_t context_len = 64;
  double lr = 0.0;
  double beta = 0.0;
  CLI::Option* beta_opt = nullptr;
  uint64_t seed = 0;
  std::string out_dir = "out";
  std::string config_file;

  void add_to(CLI::App* sub, ConfigMerge& merge, int64_t default_steps) {
    steps = default_steps;
    merge.bind(sub->add_option("--data", data, "input JSONL corpus")->required(),
               data);
    auto bind = [&](CLI::Option* opt, auto& var) { merge.bind(opt, var); };
    bind(sub->add_option("--arch", arch, "bigram | mlp | transformer1"), arch);
    bind(sub->add_option("--steps", steps, "optimization steps"), steps);
    bind(sub->add_option("--batch-size", batch_size, "records per step"),
         batch_size);
    bind(sub->add_option("--lr", lr, "learning rate (0 = architecture default)"),
         lr);
    bind(sub->add_option("--optimizer", optimizer, "adam | sgd"), optimizer);
    bind(sub->add_option("--grad-mode", grad_mode,
                         "serial | parallel (bit-identical results)"),
         grad_mode);
    beta_opt = sub->add_option("--beta", beta, "dpo inverse temperature");
    bind(beta_opt, beta);
    bind(sub->add_option("--embed-dim", embed_dim, "embedding width"), embed_dim);
    bind(sub->add_option("--hidden-dim", hidden_dim, "hidden width"), hidden_dim);
    bind(sub->add_option("--context-len", context_len, "max prompt+response"),
         context_len);
    bind(sub->add_option("--seed", seed, "run seed"), seed);
    bind(sub->add_option("--out-dir", out_dir, "output directory"), out_dir);
    sub->add_option("--config", config_file,
                    "JSON config file; explicit flags win");
  }

  // In a multi-variant comparison --beta is there for the dpo entry and is
  // simply unused by the rest; a single-variant run rejects a stray --beta.
  TrainConfig to_config(LossKind variant, bool beta_may_idle = false) const {
    if (steps < 1) throw UsageError("--steps must be >= 1");
    if (batch_size < 1) throw UsageError("--batch-size must be >= 1");
    if (lr < 0.0) throw UsageError("--lr must be >= 0");
    const bool has_beta = beta_opt->count() > 0 || beta != 0.0;
    if (variant == LossKind::dpo && !has_beta)
      throw UsageError("--variant dpo requires --beta");
    if (variant != LossKind::dpo && has_beta && !beta_may_idle)
      throw UsageError("--beta is only valid with --variant dpo");
    TrainConfig cfg;
    cfg.variant = variant;
    cfg.arch = parse_arch(arch);
    cfg.embed_dim = embed_dim;
    cfg.hidden_dim = hidden_dim;
    cfg.context_len = context_len;
    cfg.learning_rate = lr;
    cfg.steps = steps;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    try {
      cfg.optimizer = optim_from_name(optimizer);
      cfg.grad_mode = grad_mode_from_name(grad_mode);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (variant == LossKind::dpo) cfg.dpo_beta = beta;
    return cfg;
  }

  nlohmann::json config_json(const std::string& variant) const {
    nlohmann::json j = {{"variant", variant},
                        {"arch", arch},
                        {"steps", steps},
                        {"batch_size", batch_size},
                        {"lr", lr},
                        {"optimizer", optimizer},
                        {"grad_mode", grad_mode},
                        {"embed_dim", embed_dim},
                        {"hidden_dim", hidden_dim},
                        {"context_len", context_len},
                        {"seed", seed}};
    if (beta_opt->count() > 0 || beta != 0.0) j["beta"] = beta;
    return j;
  }
};

int cmd_gen_data(int64_t prompts, int64_t responses, double noise, uint64_t seed,
                 const std::string& out_dir) {
  if (prompts < 1) throw UsageError("--prompts must be >= 1");
  if (responses < 1) throw UsageError("--responses must be >= 1");
  if (noise < 0.0) throw UsageError("--noise must be >= 0");
  std::filesystem::create_directories(out_dir);
  const auto records = generate_synthetic(prompts, responses, noise, seed);
  const auto data_path = std::filesystem::path(out_dir) / "data.jsonl";
  save_records(data_path, records);

  nlohmann::json sidecar = {{"seed", seed},
                            {"num_prompts", prompts},
                            {"responses_per_prompt", responses},
                            {"noise", noise},
                            {"scorer_version", GroundTruthScorer::kVersion}};
  const auto sidecar_path = std::filesystem::path(out_dir) / "data.manifest.json";
  write_text(sidecar_path, sidecar.dump(1) + "\n");

  ManifestBuilder manifest("gen-data", seed);
  manifest.set_config(sidecar);
  manifest.add_output(data_path);
  manifest.add_output(sidecar_path);
  manifest.write(out_dir);

  std::cout << "wrote " << records.size() << " records ("
            << records.size() * static_cast<size_t>(responses) << " responses) to "
            << data_path.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainFlags& flags, const std::string& variant_id) {
  const LossKind variant = parse_variant(variant_id);
  const TrainConfig cfg = flags.to_config(variant);
  const auto records = load_records(flags.data);
  std::filesystem::create_directories(flags.out_dir);

  const auto csv_path = std::filesystem::path(flags.out_dir) / "metrics.csv";
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) fail(ErrKind::io, "cannot write ", csv_path.string());
  bool wrote_header = false;
  auto on_row = [&](const MetricsRow& row) {
    if (!wrote_header) {
      csv << MetricsLog::header_for(
                 static_cast<int64_t>(row.p_rejected_slots.size()))
          << "\n";
      wrote_header = true;
    }
    csv << MetricsLog::row_csv(row) << "\n";
    if (row.step % 100 == 0) csv.flush();
  };

  TrainResult result = train(cfg, records, on_row);
  csv.close();
  if (!csv) fail(ErrKind::io, "write failed for ", csv_path.string());

  const auto ckpt_path = std::filesystem::path(flags.out_dir) / "checkpoint.json";
  result.model.save(ckpt_path, result.vocab);

  ManifestBuilder manifest("train", flags.seed);
  manifest.set_config(flags.config_json(variant_id));
  manifest.add_input(flags.data);
  manifest.add_output(csv_path);
  manifest.add_output(ckpt_path);
  manifest.write(flags.out_dir);

  const MetricsRow& last = result.log.rows.back();
  std::cout << "trained " << variant_id << " for " << cfg.steps
            << " steps: final loss " << last.loss << ", margin " << last.margin
            << " (skipped " << result.skipped_records << " records)\n"
            << "wrote " << csv_path.string() << " and " << ckpt_path.string()
            << "\n";
  return kExitOk;
}

int cmd_gradcheck(const std::string& variant_id, int64_t points, double eps,
                  double tol, uint64_t seed) {
  if (points < 1) throw UsageError("--points must be >= 1");
  if (!(eps > 0.0)) throw UsageError("--eps must be > 0");
  if (!(tol > 0.0)) throw UsageError("--tol must be > 0");
  std::vector<std::string> ids;
  if (variant_id.empty()) ids = loss_ids();
  else {
    parse_variant(variant_id);
    ids.push_back(variant_id);
  }

  bool all_pass = true;
  std::printf("%-12s %7s %13s  %s\n", "variant", "points", "max_error", "status");
  for (const auto& id : ids) {
    const LossKind kind = loss_from_id(id);
    Rng rng = Rng::substream(seed, id);
    double max_error = 0.0;
    bool pass = true;
    size_t worst_coord = 0;
    for (int64_t i = 0; i < points; ++i) {
      const ad::GradCheckReport report = grad_check_loss(kind, rng, eps, tol);
      if (report.max_error > max_error) {
        max_error = report.max_error;
        for (const auto& entry : report.entries)
          if (entry.error == report.max_error) worst_coord = entry.coord;
      }
      pass = pass && report.pass;
    }
    std::printf("%-12s %7lld %13.3e  %s", id.c_str(),
                static_cast<long long>(points), max_error,
                pass ? "PASS" : "FAIL");
    if (!pass) std::printf(" (worst coordinate %zu)", worst_coord);
    std::printf("\n");
    all_pass = all_pass && pass;
  }
  return all_pass ? kExitOk : kExitRuntime;
}

int cmd_eval(const std::string& checkpoint, const std::string& data,
             const std::string& out_dir, uint64_t seed) {
  auto [model, vocab] = PolicyModel::load(checkpoint);
  const auto records = load_records(data);
  const RankingReport report = eval_ranking(model, vocab, records);
  std::printf("top1_acc=%.4f concordance=%.4f evaluated=%lld skipped=%lld\n",
              report.top1_acc, report.concordance,
              static_cast<long long>(report.evaluated),
              static_cast<long long>(report.skipped));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json j = {{"top1_acc", report.top1_acc},
                        {"concordance", report.concordance},
                        {"evaluated", report.evaluated},
                        {"skipped", report.skipped}};
    const auto eval_path = std::filesystem::path(out_dir) / "eval.json";
    write_text(eval_path, j.dump(1) + "\n");
    ManifestBuilder manifest("eval", seed);
    manifest.set_config({{"checkpoint", checkpoint}, {"data", data}});
    manifest.add_input(checkpoint);
    manifest.add_input(data);
    manifest.add_output(eval_path);
    manifest.write(out_dir);
  }
  return kExitOk;
}

int cmd_compare(const TrainFlags& flags, const std::string& variants_arg) {
  std::vector<std::string> ids;
  if (variants_arg == "all") {
    ids = loss_ids();
  } else {
    for (const auto& id : split(variants_arg, ','))
      if (!id.empty()) ids.push_back(id);
  }
  if (ids.empty()) throw UsageError("--variants selects no variant");
  std::vector<TrainConfig> configs;
  for (const auto& id : ids)
    configs.push_back(
        flags.to_config(parse_variant(id), /*beta_may_idle=*/true));

  const auto records = load_records(flags.data);
  const auto rows = compare_variants(configs, records);
  const std::string csv = comparison_csv(rows);

  std::filesystem::create_directories(flags.out_dir);
  const auto csv_path = std::filesystem::path(flags.out_dir) / "comparison.csv";
  write_text(csv_path, csv);

  ManifestBuilder manifest("compare", flags.seed);
  nlohmann::json config = flags.config_json("");
  config.erase("variant");
  config["variants"] = ids;
  manifest.set_config(config);
  manifest.add_input(flags.data);
  manifest.add_output(csv_path);
  manifest.write(flags.out_dir);

  std::cout << csv << "wrote " << csv_path.string() << "\n";
  return kExitOk;
}

// Metrics CSV reader for plotting. Validates the fixed column prefix and
// numeric cells, reporting the offending row on failure.
struct ParsedMetrics {
  int64_t num_slots = 0;
  std::vector<std::vector<double>> rows;  // step, loss, chosen, rejected, margin, lr, slots...
};

ParsedMetrics parse_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrKind::io, "cannot open ", path.string());
  std::string line;
  if (!std::getline(in, line))
    fail(ErrKind::io, path.string(), ": empty file");
  const auto cols = split(line, ',');
  const std::vector<std::string> fixed = {"step",   "loss", "p_chosen_mean",
                                          "p_rejected_mean", "margin", "lr"};
  if (cols.size() < fixed.size())
    fail(ErrKind::io, path.string(), ": row 1: expected at least ", fixed.size(),
         " columns, got ", cols.size());
  for (size_t i = 0; i < fixed.size(); ++i)
    if (cols[i] != fixed[i])
      fail(ErrKind::io, path.string(), ": row 1: column ", i + 1, " is '",
           cols[i], "', expected '", fixed[i], "'");
  ParsedMetrics parsed;
  parsed.num_slots = static_cast<int64_t>(cols.size() - fixed.size());
  for (size_t s = 0; s < static_cast<size_t>(parsed.num_slots); ++s)
    if (cols[fixed.size() + s] != "p_rejected_" + std::to_string(s + 1))
      fail(ErrKind::io, path.string(), ": row 1: unexpected column '",
           cols[fixed.size() + s], "'");

  size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != cols.size())
      fail(ErrKind::io, path.string(), ": row ", row_no, ": expected ",
           cols.size(), " cells, got ", cells.size());
    std::vector<double> values;
    for (const auto& cell : cells) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        fail(ErrKind::io, path.string(), ": row ", row_no,
             ": non-numeric cell '", cell, "'");
      values.push_back(v);
    }
    parsed.rows.push_back(std::move(values));
  }
  if (parsed.rows.empty())
    fail(ErrKind::io, path.string(), ": no data rows");
  return parsed;
}

int cmd_plot(const std::string& metrics, const std::string& out_dir,
             uint64_t seed) {
  const ParsedMetrics parsed = parse_metrics_csv(metrics);
  std::vector<double> steps;
  for (const auto& row : parsed.rows) steps.push_back(row[0]);

  std::vector<Series> likelihood;
  Series chosen{"chosen", steps, {}};
  for (const auto& row : parsed.rows) chosen.y.push_back(row[2]);
  likelihood.push_back(std::move(chosen));
  for (int64_t s = 0; s < parsed.num_slots; ++s) {
    Series rejected{"rejected " + std::to_string(s + 1), steps, {}};
    for (const auto& row : parsed.rows)
      rejected.y.push_back(row[6 + static_cast<size_t>(s)]);
    likelihood.push_back(std::move(rejected));
  }
  Series loss{"loss", steps, {}};
  for (const auto& row : parsed.rows) loss.y.push_back(row[1]);

  std::filesystem::create_directories(out_dir);
  const auto like_path = std::filesystem::path(out_dir) / "likelihood.svg";
  const auto loss_path = std::filesystem::path(out_dir) / "loss.svg";
  write_text(like_path,
             render_line_chart("average response likelihood", "step", "p",
                               likelihood));
  write_text(loss_path, render_line_chart("training loss", "step", "loss",
                                          {std::move(loss)}));

  ManifestBuilder manifest("plot", seed);
  manifest.set_config({{"metrics", metrics}});
  manifest.add_input(metrics);
  manifest.add_output(like_path);
  manifest.add_output(loss_path);
  manifest.write(out_dir);

  std::cout << "wrote " << like_path.string() << " and " << loss_path.string()
            << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"desk-scale preference-optimization laboratory"};
  app.require_subcommand(1);
  int result = kExitOk;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  struct {
    int64_t prompts = 200;
    int64_t responses = 4;
    double noise = 0.0;
    uint64_t seed = 0;
    std::string out_dir = "out";
    std::string config_file;
  } g;
  ConfigMerge gen_merge;
  gen_merge.bind(gen->add_option("--prompts", g.prompts, "number of prompts"),
                 g.prompts);
  gen_merge.bind(
      gen->add_option("--responses", g.responses, "responses per prompt"),
      g.responses);
  gen_merge.bind(gen->add_option("--noise", g.noise, "score jitter stddev"),
                 g.noise);
  gen_merge.bind(gen->add_option("--seed", g.seed, "run seed"), g.seed);
  gen_merge.bind(gen->add_option("--out-dir", g.out_dir, "output directory"),
                 g.out_dir);
  gen->add_option("--config", g.config_file,
                  "JSON config file; explicit flags win");
  gen->callback([&] {
    gen_merge.apply(g.config_file);
    result = cmd_gen_data(g.prompts, g.responses, g.noise, g.seed, g.out_dir);
  });

  // train
  auto* tr = app.add_subcommand("train", "train one loss variant");
  TrainFlags train_flags;
  std::string train_variant;
  ConfigMerge train_merge;
  train_merge.bind(
      tr->add_option("--variant", train_variant, "loss variant id")->required(),
      train_variant);
  train_flags.add_to(tr, train_merge, 2000);
  tr->callback([&] {
    train_merge.apply(train_flags.config_file);
    result = cmd_train(train_flags, train_variant);
  });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference check of the loss variants");
  struct {
    std::string variant;
    int64_t points = 100;
    double eps = 1e-5;
    double tol = 1e-4;
    uint64_t seed = 0;
    std::string config_file;
  } c;
  ConfigMerge gc_merge;
  gc_merge.bind(gc->add_option("--variant", c.variant,
                               "single variant id (default: all)"),
                c.variant);
  gc_merge.bind(gc->add_option("--points", c.points, "random points per variant"),
                c.points);
  gc_merge.bind(gc->add_option("--eps", c.eps, "finite-difference step"), c.eps);
  gc_merge.bind(gc->add_option("--tol", c.tol, "max relative error"), c.tol);
  gc_merge.bind(gc->add_option("--seed", c.seed, "run seed"), c.seed);
  gc->add_option("--config", c.config_file,
                 "JSON config file; explicit flags win");
  gc->callback([&] {
    gc_merge.apply(c.config_file);
    result = cmd_gradcheck(c.variant, c.points, c.eps, c.tol, c.seed);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "ranking quality of a checkpoint");
  struct {
    std::string checkpoint;
    std::string data;
    std::string out_dir;
    uint64_t seed = 0;
    std::string config_file;
  } e;
  ConfigMerge ev_merge;
  ev_merge.bind(
      ev->add_option("--checkpoint", e.checkpoint, "model checkpoint")->required(),
      e.checkpoint);
  ev_merge.bind(ev->add_option("--data", e.data, "input JSONL corpus")->required(),
                e.data);
  ev_merge.bind(ev->add_option("--out-dir", e.out_dir,
                               "output directory (optional, for eval.json)"),
                e.out_dir);
  ev_merge.bind(ev->add_option("--seed", e.seed, "run seed"), e.seed);
  ev->add_option("--config", e.config_file,
                 "JSON config file; explicit flags win");
  ev->callback([&] {
    ev_merge.apply(e.config_file);
    result = cmd_eval(e.checkpoint, e.data, e.out_dir, e.seed);
  });

  // compare
  auto* cp = app.add_subcommand("compare", "train and rank several variants");
  TrainFlags compare_flags;
  std::string compare_variants_arg =
      "point-ce,point-mse,pair-single,pair-mns,pair-mnm,pair-mcs,pair-mcm,"
      "list-mle";
  ConfigMerge cp_merge;
  cp_merge.bind(cp->add_option("--variants", compare_variants_arg,
                               "comma-separated variant ids, or 'all'"),
                compare_variants_arg);
  compare_flags.add_to(cp, cp_merge, 500);
  cp->callback([&] {
    cp_merge.apply(compare_flags.config_file);
    result = cmd_compare(compare_flags, compare_variants_arg);
  });

  // plot
  auto* pl = app.add_subcommand("plot", "render metrics CSV to SVG charts");
  struct {
    std::string metrics;
    std::string out_dir = "out";
    uint64_t seed = 0;
    std::string config_file;
  } p;
  ConfigMerge pl_merge;
  pl_merge.bind(
      pl->add_option("--metrics", p.metrics, "metrics CSV from train")->required(),
      p.metrics);
  pl_merge.bind(pl->add_option("--out-dir", p.out_dir, "output directory"),
                p.out_dir);
  pl_merge.bind(pl->add_option("--seed", p.seed, "run seed"), p.seed);
  pl->add_option("--config", p.config_file,
                 "JSON config file; explicit flags win");
  pl->callback([&] {
    pl_merge.apply(p.config_file);
    result = cmd_plot(p.metrics, p.out_dir, p.seed);
  });

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& parse_error) {
    app.exit(parse_error);
    return kExitUsage;
  } catch (const UsageError& usage) {
    std::cerr << "error: " << usage.what() << "\n";
    return kExitUsage;
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& other) {
    std::cerr << "error: " << other.what() << "\n";
    return kExitRuntime;
  }
  return result;
}

}  // namespace prefopt
