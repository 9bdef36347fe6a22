#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mergan/adam.hpp"
#include "mergan/data.hpp"
#include "mergan/losses.hpp"
#include "mergan/model.hpp"

namespace mergan {

enum class Strategy { JT, SFT, EWC, MERGAN_JTR, MERGAN_RA };

std::string_view strategy_name(Strategy s);
/// Accepts the names printed by strategy_name(), case-insensitively.
std::optional<Strategy> parse_strategy(std::string_view name);

struct TrainConfig {
  Strategy strategy = Strategy::MERGAN_RA;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  std::size_t batch_size = 64;
  std::size_t n_critic = 5;
  std::size_t iters_per_task = 2000;
  LossWeights lambda;
  std::size_t fisher_samples = 512;
  std::size_t latent_dim = 32;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, 1e-8}; }
};

/// Everything the trainer carries across iterations and tasks.
struct TrainingState {
  ModelParams params;
  AdamState generator_opt;
  AdamState critic_opt;
  std::optional<ModelParams> replay_generator;  // frozen snapshot of the previous task
  std::optional<FisherState> fisher;
  int task = 0;  // last task started (1-based)
  std::size_t global_iter = 0;
  std::size_t critic_updates = 0;
  std::size_t generator_updates = 0;
};

struct IterationLog {
  std::size_t global_iter = 0;
  int task = 0;
  std::size_t iteration = 0;  // 1-based within the task
  LossTerms terms;
  std::size_t critic_updates = 0;     // cumulative
  std::size_t generator_updates = 0;  // cumulative
  std::uint64_t live_id = 0;
  std::uint64_t replay_source = 0;  // id of the params that produced this iteration's replays, 0 if none
  /// Max-abs gradient of the alignment term w.r.t. the generator, measured at
  /// the first iteration of a task; NaN elsewhere or when RA is inactive.
  double ra_gradient_max = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHooks {
  std::function<void(const IterationLog&)> on_iteration;
  /// Every eval_every iterations within a task.
  std::function<void(std::size_t global_iter, int task, const TrainingState&)> on_evaluate;
  /// After snapshot/Fisher preparation, before the first update of the task.
  std::function<void(int task, const TrainingState&)> on_task_begin;
  std::function<void(int task, const TrainingState&)> on_task_end;
};

/// Streams derived from the seed. Each strategy reads the same named streams,
/// so runs that coincide by definition also coincide bitwise.
Rng init_stream(std::uint64_t seed);
Rng train_stream(std::uint64_t seed, int task);
Rng fisher_stream(std::uint64_t seed, int task);

/// Joint training on every listed category for iters_per_task iterations;
/// `task` only labels the logs. Real data is the union of the schedule's
/// training sets for those categories and fake categories are U over the list.
void train_joint(const TrainConfig& config, const TaskSchedule& schedule, std::span<const int> categories, int task,
                 TrainingState& state, Rng& rng, const TrainHooks& hooks = {});

/// Per-task trainers. They start from state.params as left by task t - 1 and
/// expect run_sequence's preparation (snapshot, Fisher) to be present.
void train_sft(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state, Rng& rng,
               const TrainHooks& hooks = {});
void train_ewc(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state, Rng& rng,
               const TrainHooks& hooks = {});
void train_mergan_jtr(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state,
                      Rng& rng, const TrainHooks& hooks = {});
void train_mergan_ra(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state,
                     Rng& rng, const TrainHooks& hooks = {});

/// Fresh parameters from the "init" stream.
TrainingState initial_state(const TrainConfig& config, const Architecture& arch);

/// Task boundary work: reset optimizer moments, snapshot the generator for the
/// replay strategies, estimate the Fisher information for EWC.
void prepare_task(const TrainConfig& config, int task, TrainingState& state);

/// The whole sequence. JT trains all categories for M blocks of
/// iters_per_task; the others train task t on category t. A resumed state
/// continues with task state.task + 1 and must sit at the end of state.task.
TrainingState run_sequence(const TrainConfig& config, const Architecture& arch, const TaskSchedule& schedule,
                           const TrainHooks& hooks = {}, std::optional<TrainingState> resume = std::nullopt);

}  // namespace mergan
