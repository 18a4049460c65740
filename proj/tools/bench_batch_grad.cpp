// Benchmark comparing the serial reference batch gradient against the
// OpenMP-parallel one. Both reduce per-task gradients in task order, so the
// trained parameters must agree bit for bit; the run fails if they do not.
#include <bit>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefopt/data.hpp"
#include "prefopt/trainer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

struct TimedRun {
  prefopt::TrainResult result;
  double seconds;
};

TimedRun timed_train(const prefopt::TrainConfig& config,
                     const std::vector<prefopt::PreferenceRecord>& records) {
  const auto start = Clock::now();
  prefopt::TrainResult result = prefopt::train(config, records);
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  return {std::move(result), s};
}

bool params_bit_identical(const prefopt::PolicyModel& a,
                          const prefopt::PolicyModel& b) {
  const auto& pa = a.params();
  const auto& pb = b.params();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    const auto va = pa[i].second.values();
    const auto vb = pb[i].second.values();
    if (pa[i].first != pb[i].first || va.size() != vb.size()) return false;
    for (size_t j = 0; j < va.size(); ++j)
      if (std::bit_cast<uint64_t>(va[j]) != std::bit_cast<uint64_t>(vb[j]))
        return false;
  }
  return true;
}

bool logs_identical(const prefopt::MetricsLog& a, const prefopt::MetricsLog& b) {
  return a.to_csv() == b.to_csv();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel batch-gradient benchmark"};
  int64_t records = 64;
  int64_t responses = 4;
  int64_t steps = 20;
  int64_t batch = 16;
  uint64_t seed = 0;
  std::string arch = "bigram";
  app.add_option("--records", records, "corpus prompts");
  app.add_option("--responses", responses, "responses per prompt");
  app.add_option("--steps", steps, "optimization steps");
  app.add_option("--batch", batch, "records per step");
  app.add_option("--seed", seed, "run seed");
  app.add_option("--arch", arch, "bigram | mlp | transformer1");
  CLI11_PARSE(app, argc, argv);

  const auto corpus = prefopt::generate_synthetic(records, responses, 0.0, seed);

  prefopt::TrainConfig config;
  config.variant = prefopt::LossKind::pair_mnm;
  config.arch = prefopt::arch_from_name(arch);
  config.steps = steps;
  config.batch_size = batch;
  config.seed = seed;

  config.grad_mode = prefopt::GradMode::serial;
  TimedRun serial = timed_train(config, corpus);
  const double serial_s = serial.seconds;

  config.grad_mode = prefopt::GradMode::parallel;
  TimedRun parallel = timed_train(config, corpus);
  const double parallel_s = parallel.seconds;

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif

  const bool same_params =
      params_bit_identical(serial.result.model, parallel.result.model);
  const bool same_logs = logs_identical(serial.result.log, parallel.result.log);

  std::printf("arch=%s records=%lld responses=%lld steps=%lld batch=%lld threads=%d\n",
              arch.c_str(), static_cast<long long>(records),
              static_cast<long long>(responses), static_cast<long long>(steps),
              static_cast<long long>(batch), threads);
  std::printf("%-10s %10s %12s\n", "mode", "time_s", "steps_per_s");
  std::printf("%-10s %10.3f %12.2f\n", "serial", serial_s, steps / serial_s);
  std::printf("%-10s %10.3f %12.2f\n", "parallel", parallel_s,
              steps / parallel_s);
  std::printf("speedup %.2fx\n", serial_s / parallel_s);
  std::printf("params bit-identical: %s\n", same_params ? "yes" : "NO");
  std::printf("metrics identical:    %s\n", same_logs ? "yes" : "NO");
  return (same_params && same_logs) ? 0 : 1;
}
