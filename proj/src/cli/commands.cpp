#include "mergan/commands.hpp"

#include <cinttypes>
#include <limits>

#include "mergan/checkpoint.hpp"
#include "mergan/outputs.hpp"

namespace mergan {

namespace fs = std::filesystem;

namespace {

void note(std::FILE* log, const char* fmt, auto... args) {
  if (log == nullptr) return;
  std::fprintf(log, fmt, args...);
  std::fflush(log);
}

std::string grid_name(std::size_t global_iter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%07zu.pgm", global_iter);
  return buf;
}

}  // namespace

std::vector<int> seen_categories(Strategy strategy, int task, std::size_t categories) {
  const int last = strategy == Strategy::JT ? static_cast<int>(categories) : task;
  std::vector<int> out;
  for (int c = 1; c <= last; ++c) out.push_back(c);
  return out;
}

ProxyClassifier obtain_proxy(const RunConfig& config, const TaskSchedule& schedule, std::FILE* log) {
  const fs::path path = config.output_dir / "proxy.ckpt";
  const std::size_t input_dim = config.architecture().data_dim();
  if (fs::exists(path)) {
    ProxyClassifier proxy = restore_proxy(load_checkpoint(path));
    if (proxy.classifier.input_dim() != input_dim || proxy.classifier.categories() != config.categories) {
      throw CheckpointError(path.string() + " was trained for different data");
    }
    note(log, "[proxy] loaded %s (test accuracy %.4f)\n", path.string().c_str(), proxy.test_accuracy);
    return proxy;
  }
  note(log, "[proxy] no %s, training one\n", path.string().c_str());
  ProxyClassifier proxy = train_proxy(schedule, config.proxy, config.train.seed, config.proxy_min_accuracy,
                                      config.dataset == DatasetKind::Gauss2D);
  note(log, "[proxy] test accuracy %.4f\n", proxy.test_accuracy);
  fs::create_directories(config.output_dir);
  save_checkpoint(make_proxy_checkpoint(proxy), path);
  return proxy;
}

Tensor sample_grid_images(const ModelParams& params, std::span<const int> categories, std::size_t n,
                          std::uint64_t z_seed) {
  const Architecture& a = params.architecture();
  if (a.mode != OutputMode::Image) throw std::invalid_argument("image grids need an image model");
  category_rows(categories, a.categories);
  Rng rng = Rng(z_seed).split("grid");
  const Tensor z = sample_gaussian(rng, Shape{n, a.latent_dim});
  std::vector<Tensor> rows;
  for (int c : categories) rows.push_back(generate_eval(params, z, std::vector<int>(n, c)));
  Tensor all = concat_rows(rows);
  return all.reshaped(Shape{categories.size() * n, a.height, a.width});
}

TrainOutcome run_training(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const Architecture arch = config.architecture();
  const TaskSchedule schedule = config.schedule();
  fs::create_directories(config.output_dir);
  const fs::path grids = config.output_dir / "grids", ckpts = config.output_dir / "checkpoints";
  if (config.grids && arch.mode == OutputMode::Image) fs::create_directories(grids);
  if (config.checkpoints) fs::create_directories(ckpts);
  write_file_atomic(config.output_dir / "config.txt", render_config(config));

  const ProxyClassifier proxy = obtain_proxy(config, schedule, options.log);
  SequenceEvaluator evaluator(proxy, schedule, config.eval, config.train.seed, arch.latent_dim);
  MetricsLog metrics(config.output_dir / "metrics.csv");

  std::optional<TrainingState> resume;
  if (options.resume) {
    RestoredRun run = restore_run(load_checkpoint(*options.resume));
    if (run.architecture != arch) throw ConfigError("checkpoint architecture differs from the config");
    if (run.strategy != config.train.strategy) {
      throw ConfigError("checkpoint was written by strategy " + std::string(strategy_name(run.strategy)));
    }
    evaluator.restore_references(std::move(run.probe_references));
    metrics.load_existing(run.state.global_iter);
    note(options.log, "[train] resuming after task %d at iteration %zu\n", run.state.task, run.state.global_iter);
    resume = std::move(run.state);
  }
  metrics.append({});

  const Strategy strategy = config.train.strategy;
  TrainHooks hooks;
  hooks.on_evaluate = [&](std::size_t global_iter, int task, const TrainingState& state) {
    const std::vector<int> seen = seen_categories(strategy, task, config.categories);
    const std::vector<MetricRow> rows = evaluator.evaluate(global_iter, task, state.params, seen);
    metrics.append(rows);
    if (config.grids && arch.mode == OutputMode::Image) {
      const Tensor images = sample_grid_images(state.params, seen, config.grid_columns, config.train.seed);
      write_pgm(grids / grid_name(global_iter),
                image_grid(images, seen.size(), config.grid_columns, config.grid_separator));
    }
    for (const MetricRow& r : rows) {
      if (r.metric == "mean_accuracy") {
        note(options.log, "[train] %s task %d iter %zu mean_accuracy %.4f\n", std::string(strategy_name(strategy)).c_str(),
             task, global_iter, r.value);
      }
    }
  };
  hooks.on_task_end = [&](int task, const TrainingState& state) {
    evaluator.record_probe_reference(task, state.params);
    if (config.checkpoints) {
      save_checkpoint(make_checkpoint(config.train, state, evaluator.references()),
                      ckpts / ("task" + std::to_string(task) + ".ckpt"));
    }
  };

  TrainOutcome out;
  out.state = run_sequence(config.train, arch, schedule, hooks, std::move(resume));
  out.rows = metrics.rows();
  out.proxy_accuracy = proxy.test_accuracy;
  return out;
}

std::vector<MetricRow> evaluate_checkpoint(const RunConfig& config, const ProxyClassifier& proxy,
                                           const TaskSchedule& schedule, const fs::path& checkpoint) {
  RestoredRun run = restore_run(load_checkpoint(checkpoint));
  if (run.architecture.categories != config.categories || run.architecture.data_dim() != config.architecture().data_dim()) {
    throw ConfigError("checkpoint " + checkpoint.string() + " does not match the dataset of the config");
  }
  const ModelParams& params = run.state.params;
  const std::vector<int> seen = seen_categories(run.strategy, run.state.task, config.categories);
  SequenceEvaluator evaluator(proxy, schedule, config.eval, config.train.seed, run.architecture.latent_dim);
  evaluator.restore_references(run.probe_references);
  std::vector<MetricRow> rows = evaluator.evaluate(run.state.global_iter, run.state.task, params, seen);
  Rng rng = Rng(config.train.seed).split("reverse", run.state.global_iter);
  const double rev = reverse_accuracy(params, seen, schedule, config.proxy, config.eval.samples_per_category, rng);
  rows.push_back({run.state.global_iter, run.state.task, "reverse_accuracy", "all", rev});
  return rows;
}

int report_failure(const std::exception& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  return dynamic_cast<const NumericalError*>(&e) != nullptr ? kExitNumerical : kExitError;
}

int cmd_train(const fs::path& config_path, const TrainOptions& options) {
  try {
    RunConfig config = load_config(config_path);
    apply_environment(config);
    const TrainOutcome out = run_training(config, options);
    note(options.log, "[train] done: %zu iterations, %zu metric rows in %s\n", out.state.global_iter, out.rows.size(),
         (config.output_dir / "metrics.csv").string().c_str());
    return kExitOk;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
}

int cmd_sample(const fs::path& checkpoint, std::vector<int> categories, std::size_t n, std::uint64_t z_seed,
               const fs::path& out, std::size_t separator) {
  try {
    const RestoredRun run = restore_run(load_checkpoint(checkpoint));
    if (categories.empty()) categories = seen_categories(Strategy::JT, 0, run.architecture.categories);
    if (n == 0) throw std::invalid_argument("need at least one latent vector per row");
    const Tensor images = sample_grid_images(run.state.params, categories, n, z_seed);
    write_pgm(out, image_grid(images, categories.size(), n, separator));
    return kExitOk;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
}

int cmd_eval(const fs::path& checkpoint, const fs::path& config_path, std::optional<fs::path> csv) {
  try {
    RunConfig config = load_config(config_path);
    apply_environment(config);
    config.validate();
    const TaskSchedule schedule = config.schedule();
    const ProxyClassifier proxy = obtain_proxy(config, schedule, stderr);
    const std::vector<MetricRow> rows = evaluate_checkpoint(config, proxy, schedule, checkpoint);
    std::printf("%-16s %-8s %s\n", "metric", "category", "value");
    for (const MetricRow& r : rows) std::printf("%-16s %-8s %.6f\n", r.metric.c_str(), r.category.c_str(), r.value);
    MetricsLog log(csv.value_or(config.output_dir / "metrics.csv"));
    log.load_existing(std::numeric_limits<std::size_t>::max());
    log.append(rows);
    return kExitOk;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
}

int cmd_gradcheck(const SuiteOptions& options, std::FILE* out) {
  try {
    const std::vector<SuiteCheck> checks = run_gradcheck_suite(options);
    bool ok = true;
    for (const SuiteCheck& c : checks) {
      std::fprintf(out, "%-4s %-5s %-28s worst_rel_err %.3e  tol %.0e  n=%zu\n", c.passed ? "ok" : "FAIL",
                   c.kind.c_str(), c.name.c_str(), c.worst_rel_error, c.tolerance, c.instances);
      ok = ok && c.passed;
    }
    std::fprintf(out, "%s: %zu checks\n", ok ? "all gradient checks passed" : "GRADIENT CHECK FAILURES", checks.size());
    return ok ? kExitOk : kExitError;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
}

}  // namespace mergan
