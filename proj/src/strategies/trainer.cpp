#include "mergan/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace mergan {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::JT: return "JT";
    case Strategy::SFT: return "SFT";
    case Strategy::EWC: return "EWC";
    case Strategy::MERGAN_JTR: return "MERGAN_JTR";
    case Strategy::MERGAN_RA: return "MERGAN_RA";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  std::string upper(name);
  for (char& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (Strategy s : {Strategy::JT, Strategy::SFT, Strategy::EWC, Strategy::MERGAN_JTR, Strategy::MERGAN_RA}) {
    if (strategy_name(s) == upper) return s;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(field) + " must be positive");
  };
  auto nonnegative = [](double v, const char* field) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(field) + " must be nonnegative");
  };
  positive(learning_rate, "learning_rate");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must lie in [0, 1)");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(n_critic), "n_critic");
  positive(static_cast<double>(iters_per_task), "iters_per_task");
  positive(static_cast<double>(fisher_samples), "fisher_samples");
  positive(static_cast<double>(latent_dim), "latent_dim");
  positive(static_cast<double>(eval_every), "eval_every");
  // Zero weights are allowed: they switch a term off for ablations and the
  // reduction identities.
  nonnegative(lambda.cls, "lambda_cls");
  nonnegative(lambda.gp, "lambda_gp");
  nonnegative(lambda.ewc, "lambda_ewc");
  nonnegative(lambda.ra, "lambda_ra");
}

Rng init_stream(std::uint64_t seed) { return Rng(seed).split("init"); }
Rng train_stream(std::uint64_t seed, int task) { return Rng(seed).split("train", static_cast<std::uint64_t>(task)); }
Rng fisher_stream(std::uint64_t seed, int task) { return Rng(seed).split("fisher", static_cast<std::uint64_t>(task)); }

namespace {

/// What one task's loop does; every strategy is a particular setting.
struct Plan {
  int task = 0;
  std::vector<const LabeledSet*> real;
  std::vector<int> fake_categories;  // fake c drawn uniformly from this list
  bool replay = false;               // JTR: extra replay half in every batch
  bool classifier = false;
  bool ewc = false;
  bool align = false;
};

std::vector<int> draw_from(Rng& rng, const std::vector<int>& list, std::size_t count) {
  std::vector<int> out(count);
  const int last = static_cast<int>(list.size()) - 1;
  for (int& c : out) c = list[static_cast<std::size_t>(sample_category(rng, 0, last))];
  return out;
}

std::pair<Tensor, std::vector<int>> draw_real(const Plan& plan, Rng& rng, std::size_t batch) {
  std::size_t total = 0;
  for (const LabeledSet* set : plan.real) total += set->size();
  const std::size_t dim = plan.real.front()->samples.cols();
  Tensor x(Shape{batch, dim});
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    std::size_t index = static_cast<std::size_t>(sample_category(rng, 0, static_cast<int>(total) - 1));
    for (const LabeledSet* set : plan.real) {
      if (index < set->size()) {
        std::copy_n(set->samples.data() + index * dim, dim, x.data() + i * dim);
        labels[i] = set->labels[index];
        break;
      }
      index -= set->size();
    }
  }
  return {std::move(x), std::move(labels)};
}

Tensor flat(const Tensor& t) { return t.reshaped(Shape{t.rows(), t.cols()}); }

std::vector<Var> vars_of(const std::vector<std::pair<std::string, Var>>& named) {
  std::vector<Var> out;
  out.reserve(named.size());
  for (const auto& [name, v] : named) out.push_back(v);
  return out;
}

NamedTensors collect(const std::vector<std::pair<std::string, Var>>& named, const std::vector<Var>& grads) {
  NamedTensors out;
  out.reserve(named.size());
  for (std::size_t i = 0; i < named.size(); ++i) out.emplace_back(named[i].first, grads[i].value());
  return out;
}

void require_finite(double value, const char* what, std::size_t global_iter, int task) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite ") + what + " at global iteration " + std::to_string(global_iter) +
                         " (task " + std::to_string(task) + ")");
  }
}

class Loop {
 public:
  Loop(const TrainConfig& config, const Plan& plan, TrainingState& state, Rng& rng)
      : cfg_(config), plan_(plan), state_(state), rng_(rng) {}

  void critic_step(IterationLog& log) {
    const std::size_t b = cfg_.batch_size;
    const int t = plan_.task;
    auto [x_real, labels] = draw_real(plan_, rng_, b);
    if (plan_.replay) {
      const ModelParams& snapshot = *state_.replay_generator;
      auto [x_replay, replay_labels] = replay_batch(snapshot, rng_, b, t);
      const Tensor parts[] = {x_real, flat(x_replay)};
      x_real = concat_rows(parts);
      labels.insert(labels.end(), replay_labels.begin(), replay_labels.end());
      log.replay_source = snapshot.id();
    }
    const std::size_t rows = labels.size();
    std::vector<int> fake_c = draw_from(rng_, plan_.fake_categories, b);
    if (plan_.replay) {
      const std::vector<int> old = sample_categories(rng_, b, 1, t - 1);
      fake_c.insert(fake_c.end(), old.begin(), old.end());
    }
    const Tensor z = sample_gaussian(rng_, Shape{rows, cfg_.latent_dim});
    const Tensor eps = sample_interpolation_weights(rng_, rows);

    Graph g;
    ModelGraph live(g, state_.params);
    const Var fake = detach(live.generate(z, fake_c, NormMode::Batch));
    const Var fake_flat = reshape(fake, Shape{rows, x_real.cols()});
    const Var real = g.input(std::move(x_real));
    ModelGraph::Heads heads;
    if (plan_.classifier) heads = live.critic_and_classify(real);
    else heads.critic = live.critic(real);
    const Var fake_scores = live.critic(fake_flat);
    Var penalty;
    if (cfg_.lambda.gp != 0.0) {
      penalty = gradient_penalty([&](Var x) { return live.critic(x); }, real, fake_flat, eps);
      log.terms.gp = penalty.value().item();
    }
    const Var gan = gan_discriminator_loss(heads.critic, fake_scores, penalty, cfg_.lambda.gp);
    Var loss = gan;
    log.terms.gan_d = gan.value().item();
    if (plan_.classifier) {
      const Var cls = cls_discriminator_loss(heads.logits, labels);
      log.terms.cls_d = cls.value().item();
      loss = weighted_objective(gan, cls, cfg_.lambda.cls);
    }
    require_finite(loss.value().item(), "critic loss", log.global_iter, t);
    const auto named = live.params(plan_.classifier ? ParamGroup::CriticAndClassifier : ParamGroup::Discriminator);
    const auto grads = g.gradients(loss, vars_of(named));
    adam_step(state_.params, collect(named, grads), state_.critic_opt, cfg_.adam());
    ++state_.critic_updates;
  }

  void generator_step(IterationLog& log, bool first_of_task) {
    const std::size_t b = cfg_.batch_size;
    const int t = plan_.task;
    std::vector<int> c = draw_from(rng_, plan_.fake_categories, b);
    if (plan_.replay) {
      const std::vector<int> old = sample_categories(rng_, b, 1, t - 1);
      c.insert(c.end(), old.begin(), old.end());
    }
    const Tensor z = sample_gaussian(rng_, Shape{c.size(), cfg_.latent_dim});
    std::vector<int> replay_c;
    Tensor replay_z;
    if (plan_.align) {
      replay_c = sample_categories(rng_, b, 1, t - 1);
      replay_z = sample_gaussian(rng_, Shape{b, cfg_.latent_dim});
    }

    Graph g;
    ModelGraph live(g, state_.params);
    // The alignment term reads the running statistics, so it is built before
    // the train-mode pass below moves them.
    Var ra;
    if (plan_.align) {
      const ModelParams& snapshot = *state_.replay_generator;
      ra = replay_alignment_loss(live, snapshot, replay_z, replay_c, t);
      log.terms.ra = ra.value().item();
      log.replay_source = snapshot.id();
    }
    const Var fake = live.generate(z, c, NormMode::Train);
    ModelGraph::Heads heads;
    if (plan_.classifier) heads = live.critic_and_classify(fake);
    else heads.critic = live.critic(fake);
    const Var gan = gan_generator_loss(heads.critic);
    log.terms.gan_g = gan.value().item();
    Var loss = gan;
    if (plan_.classifier) {
      const Var cls = cls_generator_loss(heads.logits, c);
      log.terms.cls_g = cls.value().item();
      loss = weighted_objective(gan, cls, cfg_.lambda.cls);
    }
    if (plan_.ewc) {
      const Var penalty = ewc_penalty(live, *state_.fisher, cfg_.lambda.ewc);
      log.terms.ewc = penalty.value().item();
      loss = add(loss, penalty);
    }
    if (plan_.align) loss = add(loss, scale(ra, cfg_.lambda.ra));
    require_finite(loss.value().item(), "generator loss", log.global_iter, t);

    const auto named = live.params(ParamGroup::Generator);
    const std::vector<Var> wrt = vars_of(named);
    if (plan_.align && first_of_task) {
      double max_grad = 0.0;
      for (const Var& gv : g.gradients(ra, wrt)) max_grad = std::max(max_grad, gv.value().max_abs());
      log.ra_gradient_max = max_grad;
    }
    const auto grads = g.gradients(loss, wrt);
    adam_step(state_.params, collect(named, grads), state_.generator_opt, cfg_.adam());
    ++state_.generator_updates;
  }

 private:
  const TrainConfig& cfg_;
  const Plan& plan_;
  TrainingState& state_;
  Rng& rng_;
};

void run_plan(const TrainConfig& config, const Plan& plan, TrainingState& state, Rng& rng, const TrainHooks& hooks) {
  config.validate();
  if (state.params.architecture().latent_dim != config.latent_dim) {
    throw std::invalid_argument("latent_dim " + std::to_string(config.latent_dim) + " does not match the model's " +
                                std::to_string(state.params.architecture().latent_dim));
  }
  if ((plan.replay || plan.align) && !state.replay_generator) {
    throw std::logic_error("task " + std::to_string(plan.task) + " needs a replay generator snapshot");
  }
  if (plan.ewc && !state.fisher) {
    throw std::logic_error("EWC task " + std::to_string(plan.task) + " needs a Fisher estimate");
  }
  if (plan.real.empty() || plan.fake_categories.empty()) throw std::invalid_argument("empty category set");
  for (const LabeledSet* set : plan.real) {
    if (set->size() == 0) throw std::invalid_argument("empty training set in task " + std::to_string(plan.task));
  }
  Loop loop(config, plan, state, rng);
  for (std::size_t it = 1; it <= config.iters_per_task; ++it) {
    IterationLog log;
    log.global_iter = ++state.global_iter;
    log.task = plan.task;
    log.iteration = it;
    log.ra_gradient_max = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < config.n_critic; ++k) loop.critic_step(log);
    loop.generator_step(log, it == 1);
    log.critic_updates = state.critic_updates;
    log.generator_updates = state.generator_updates;
    log.live_id = state.params.id();
    if (hooks.on_iteration) hooks.on_iteration(log);
    if (hooks.on_evaluate && it % config.eval_every == 0) hooks.on_evaluate(state.global_iter, plan.task, state);
  }
}

Plan single_task_plan(const TaskSchedule& schedule, int task) {
  Plan plan;
  plan.task = task;
  plan.real = {&schedule.task(task).train};
  plan.fake_categories = {task};
  return plan;
}

}  // namespace

void train_joint(const TrainConfig& config, const TaskSchedule& schedule, std::span<const int> categories, int task,
                 TrainingState& state, Rng& rng, const TrainHooks& hooks) {
  Plan plan;
  plan.task = task;
  for (int c : categories) {
    plan.real.push_back(&schedule.task(c).train);
    plan.fake_categories.push_back(c);
  }
  plan.classifier = config.lambda.cls != 0.0;
  run_plan(config, plan, state, rng, hooks);
}

void train_sft(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state, Rng& rng,
               const TrainHooks& hooks) {
  run_plan(config, single_task_plan(schedule, task), state, rng, hooks);
}

void train_ewc(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state, Rng& rng,
               const TrainHooks& hooks) {
  Plan plan = single_task_plan(schedule, task);
  plan.ewc = task >= 2;
  run_plan(config, plan, state, rng, hooks);
}

void train_mergan_jtr(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state,
                      Rng& rng, const TrainHooks& hooks) {
  Plan plan = single_task_plan(schedule, task);
  plan.replay = task >= 2;
  plan.classifier = config.lambda.cls != 0.0;
  run_plan(config, plan, state, rng, hooks);
}

void train_mergan_ra(const TrainConfig& config, const TaskSchedule& schedule, int task, TrainingState& state,
                     Rng& rng, const TrainHooks& hooks) {
  Plan plan = single_task_plan(schedule, task);
  plan.align = task >= 2;
  run_plan(config, plan, state, rng, hooks);
}

TrainingState initial_state(const TrainConfig& config, const Architecture& arch) {
  if (arch.latent_dim != config.latent_dim) {
    throw std::invalid_argument("architecture latent_dim differs from the training config");
  }
  Rng rng = init_stream(config.seed);
  TrainingState state;
  state.params = ModelParams::initialize(arch, rng);
  return state;
}

void prepare_task(const TrainConfig& config, int task, TrainingState& state) {
  state.task = task;
  state.generator_opt = AdamState{};
  state.critic_opt = AdamState{};
  state.replay_generator.reset();
  state.fisher.reset();
  if (task < 2) return;
  if (config.strategy == Strategy::MERGAN_JTR || config.strategy == Strategy::MERGAN_RA) {
    state.replay_generator = state.params.snapshot();
  }
  if (config.strategy == Strategy::EWC) {
    Rng rng = fisher_stream(config.seed, task);
    state.fisher = estimate_fisher(state.params, config.fisher_samples, task - 1, rng);
  }
}

TrainingState run_sequence(const TrainConfig& config, const Architecture& arch, const TaskSchedule& schedule,
                           const TrainHooks& hooks, std::optional<TrainingState> resume) {
  config.validate();
  schedule.validate();
  if (schedule.size() > arch.categories) {
    throw std::invalid_argument("schedule has " + std::to_string(schedule.size()) + " tasks but the model only " +
                                std::to_string(arch.categories) + " categories");
  }
  TrainingState state = resume ? std::move(*resume) : initial_state(config, arch);
  if (state.params.architecture() != arch) throw std::invalid_argument("resumed parameters use another architecture");
  const int m = static_cast<int>(schedule.size());
  std::vector<int> all(static_cast<std::size_t>(m));
  for (int c = 1; c <= m; ++c) all[static_cast<std::size_t>(c - 1)] = c;

  for (int t = state.task + 1; t <= m; ++t) {
    if (config.strategy == Strategy::JT) {
      // One uninterrupted joint run; the blocks only mark time, so the
      // optimizer is not reset between them.
      state.task = t;
      if (hooks.on_task_begin) hooks.on_task_begin(t, state);
      Rng rng = train_stream(config.seed, t);
      train_joint(config, schedule, all, t, state, rng, hooks);
    } else {
      prepare_task(config, t, state);
      if (hooks.on_task_begin) hooks.on_task_begin(t, state);
      Rng rng = train_stream(config.seed, t);
      switch (config.strategy) {
        case Strategy::SFT: train_sft(config, schedule, t, state, rng, hooks); break;
        case Strategy::EWC: train_ewc(config, schedule, t, state, rng, hooks); break;
        case Strategy::MERGAN_JTR: train_mergan_jtr(config, schedule, t, state, rng, hooks); break;
        case Strategy::MERGAN_RA: train_mergan_ra(config, schedule, t, state, rng, hooks); break;
        case Strategy::JT: break;
      }
    }
    if (hooks.on_task_end) hooks.on_task_end(t, state);
  }
  return state;
}

}  // namespace mergan
