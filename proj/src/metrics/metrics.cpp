#include <string>

#include "mergan/metrics.hpp"

namespace mergan {

Tensor probe_latents(std::uint64_t seed, int category, std::size_t count, std::size_t latent_dim) {
  Rng rng = Rng(seed).split("probe", static_cast<std::uint64_t>(category));
  return sample_gaussian(rng, Shape{count, latent_dim});
}

SequenceEvaluator::SequenceEvaluator(const ProxyClassifier& proxy, const TaskSchedule& schedule,
                                     const EvalConfig& config, std::uint64_t seed, std::size_t latent_dim)
    : proxy_(proxy), config_(config), seed_(seed) {
  if (config.samples_per_category < 2) throw std::invalid_argument("evaluation needs at least 2 samples per category");
  for (const TaskData& task : schedule.tasks) {
    real_stats_.emplace(task.category, gaussian_stats(proxy_.embed(task.test.samples)));
    probes_.emplace(task.category, mergan::probe_latents(seed, task.category, config.probe_count, latent_dim));
  }
}

const Tensor& SequenceEvaluator::probe_latents(int category) const { return probes_.at(category); }

std::optional<Tensor> SequenceEvaluator::probe_reference(int category) const {
  auto it = references_.find("probe." + std::to_string(category));
  if (it == references_.end()) return std::nullopt;
  return it->second;
}

Tensor SequenceEvaluator::probe_images(int category, const ModelParams& params) const {
  const Tensor& z = probes_.at(category);
  const std::vector<int> cs(z.rows(), category);
  return generate_eval(params, z, cs);
}

void SequenceEvaluator::record_probe_reference(int category, const ModelParams& params) {
  references_["probe." + std::to_string(category)] = probe_images(category, params);
}

double SequenceEvaluator::probe_mse(int category, const ModelParams& params) const {
  const std::optional<Tensor> reference = probe_reference(category);
  if (!reference) throw std::logic_error("no probe reference for category " + std::to_string(category));
  const Tensor now = probe_images(category, params);
  double sum = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i) {
    const double d = now[i] - (*reference)[i];
    sum += d * d;
  }
  return sum / static_cast<double>(now.size());
}

std::vector<MetricRow> SequenceEvaluator::evaluate(std::size_t global_iter, int task, const ModelParams& params,
                                                   std::span<const int> seen) {
  Rng rng = Rng(seed_).split("eval", global_iter);
  const auto [samples, labels] = sample_generator(params, seen, config_.samples_per_category, rng);
  const AccuracyReport acc = accuracy_of_samples(samples, labels, seen, proxy_);
  const Tensor embedded = proxy_.embed(samples);
  std::vector<MetricRow> rows;
  const std::size_t n = config_.samples_per_category;
  for (std::size_t k = 0; k < seen.size(); ++k) {
    const int c = seen[k];
    const std::string cat = std::to_string(c);
    rows.push_back({global_iter, task, "accuracy", cat, acc.per_category[k]});
    const GaussianStats generated = gaussian_stats(embedded.rows_slice(k * n, n));
    rows.push_back({global_iter, task, "fd", cat, frechet_distance(generated, real_stats_.at(c))});
    if (probe_reference(c)) rows.push_back({global_iter, task, "probe_mse", cat, probe_mse(c, params)});
  }
  rows.push_back({global_iter, task, "mean_accuracy", "all", acc.mean});
  return rows;
}

}  // namespace mergan
