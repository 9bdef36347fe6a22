#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <vector>

#include "mergan/config.hpp"
#include "mergan/gradcheck_suite.hpp"
#include "mergan/metrics.hpp"
#include "mergan/trainer.hpp"

namespace mergan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;      // config, I/O, format and usage errors
inline constexpr int kExitNumerical = 2;  // NaN or Inf during training

struct TrainOptions {
  std::optional<std::filesystem::path> resume;  // checkpoint written at a task boundary
  std::FILE* log = stderr;                      // progress lines; nullptr silences them
};

struct TrainOutcome {
  TrainingState state;
  std::vector<MetricRow> rows;  // the full metrics.csv contents
  double proxy_accuracy = 0.0;
};

/// The body of `mergan train`: trains, evaluates every eval_every iterations
/// and writes metrics.csv, grids/ and checkpoints/ under config.output_dir.
/// Throws on failure; cmd_train maps exceptions to exit codes.
TrainOutcome run_training(const RunConfig& config, const TrainOptions& options = {});

/// Loads output_dir/proxy.ckpt when present, otherwise trains and stores it.
ProxyClassifier obtain_proxy(const RunConfig& config, const TaskSchedule& schedule, std::FILE* log);

/// Categories evaluated after `task`: all M for JT, 1..task otherwise.
std::vector<int> seen_categories(Strategy strategy, int task, std::size_t categories);

/// Grid layout: one row per category, one column per latent vector, the
/// same latents in every row. Latents come from Rng(z_seed).
Tensor sample_grid_images(const ModelParams& params, std::span<const int> categories, std::size_t n,
                          std::uint64_t z_seed);

/// Rows emitted by `mergan eval`: the SequenceEvaluator rows at the
/// checkpoint's iteration plus "reverse_accuracy".
std::vector<MetricRow> evaluate_checkpoint(const RunConfig& config, const ProxyClassifier& proxy,
                                           const TaskSchedule& schedule, const std::filesystem::path& checkpoint);

int cmd_train(const std::filesystem::path& config_path, const TrainOptions& options = {});
int cmd_sample(const std::filesystem::path& checkpoint, std::vector<int> categories, std::size_t n,
               std::uint64_t z_seed, const std::filesystem::path& out, std::size_t separator = 1);
int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& config_path,
             std::optional<std::filesystem::path> csv = std::nullopt);
int cmd_gradcheck(const SuiteOptions& options, std::FILE* out = stdout);

/// Prints `e` to stderr and returns the exit code for it.
int report_failure(const std::exception& e);

}  // namespace mergan
