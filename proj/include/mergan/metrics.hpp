#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mergan/adam.hpp"
#include "mergan/data.hpp"
#include "mergan/linalg.hpp"
#include "mergan/model.hpp"

namespace mergan {

struct ClassifierConfig {
  std::vector<std::size_t> hidden{256, 128};
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t iterations = 1500;
  double init_std = 0.05;
};

/// Leaky-ReLU MLP classifier over flattened inputs. The last hidden layer is
/// the embedding tap.
class Classifier {
 public:
  Classifier() = default;

  /// Minibatch Adam on (samples, 1-based labels). Batches are drawn uniformly
  /// with replacement from `rng` after initialization.
  static Classifier train(const Tensor& samples, std::span<const int> labels, std::size_t categories,
                          const ClassifierConfig& config, Rng& rng);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t categories() const noexcept { return categories_; }
  std::size_t embedding_dim() const;
  const TensorMap& params() const noexcept { return params_; }
  const ClassifierConfig& config() const noexcept { return config_; }

  Tensor logits(const Tensor& samples) const;
  Tensor embed(const Tensor& samples) const;
  /// Arg-max categories, 1-based; ties go to the lowest index.
  std::vector<int> predict(const Tensor& samples) const;
  double accuracy(const Tensor& samples, std::span<const int> labels) const;

  static Classifier from_params(std::size_t input_dim, std::size_t categories, const ClassifierConfig& config,
                                TensorMap params);

 private:
  Var forward(const std::function<Var(const std::string&)>& param, Var x, bool embedding_only) const;

  std::size_t input_dim_ = 0;
  std::size_t categories_ = 0;
  ClassifierConfig config_;
  TensorMap params_;
};

/// Real-data classifier that judges generators. For 2-D point data the
/// embedding is the identity.
struct ProxyClassifier {
  Classifier classifier;
  bool identity_embedding = false;
  double test_accuracy = 0.0;

  Tensor embed(const Tensor& samples) const;
};

/// Raised when the proxy misses its accuracy floor.
class ProxyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trains on the union of every task's training split and measures accuracy
/// on the union of test splits; throws ProxyError below `min_accuracy`.
ProxyClassifier train_proxy(const TaskSchedule& schedule, const ClassifierConfig& config, std::uint64_t seed,
                            double min_accuracy, bool identity_embedding = false);

struct AccuracyReport {
  std::vector<int> categories;
  std::vector<double> per_category;
  double mean = 0.0;  // unweighted over categories
};

/// Eval-mode samples of `params`, n per category, category-major. Latent
/// draws come from `rng` one category at a time.
std::pair<Tensor, std::vector<int>> sample_generator(const ModelParams& params, std::span<const int> categories,
                                                     std::size_t n_per_category, Rng& rng);

/// Fraction of generated samples the proxy assigns to their condition.
AccuracyReport accuracy(const ModelParams& params, std::span<const int> categories, const ProxyClassifier& proxy,
                        std::size_t n_per_category, Rng& rng);
/// Same, for already generated samples.
AccuracyReport accuracy_of_samples(const Tensor& samples, std::span<const int> labels,
                                   std::span<const int> categories, const ProxyClassifier& proxy);

/// Trains a fresh classifier (same config as the proxy) on generated samples
/// and reports its accuracy on the real test splits of `categories`.
double reverse_accuracy(const ModelParams& params, std::span<const int> categories, const TaskSchedule& schedule,
                        const ClassifierConfig& config, std::size_t n_per_category, Rng& rng);
/// The training half of reverse_accuracy for arbitrary labeled samples.
double reverse_accuracy_of_samples(const Tensor& samples, std::span<const int> labels, std::size_t categories,
                                   std::span<const int> eval_categories, const TaskSchedule& schedule,
                                   const ClassifierConfig& config, Rng& rng);

// ---- metric time series --------------------------------------------------------

struct MetricRow {
  std::size_t global_iter = 0;
  int task = 0;
  std::string metric;
  std::string category;  // category number or "all"
  double value = 0.0;
};

struct EvalConfig {
  std::size_t samples_per_category = 500;
  std::size_t probe_count = 16;  // fixed probe latents per category
};

/// Produces the rows of metrics.csv: per seen category "accuracy", "fd" and,
/// once a category's own task is finished, "probe_mse" against its
/// end-of-task probe images; plus "mean_accuracy" over seen categories.
/// Draws use streams derived from `seed` only, never the training stream.
class SequenceEvaluator {
 public:
  SequenceEvaluator(const ProxyClassifier& proxy, const TaskSchedule& schedule, const EvalConfig& config,
                    std::uint64_t seed, std::size_t latent_dim);

  std::vector<MetricRow> evaluate(std::size_t global_iter, int task, const ModelParams& params,
                                  std::span<const int> seen);
  /// Stores G(z*, category) in eval mode as the probe reference.
  void record_probe_reference(int category, const ModelParams& params);

  const Tensor& probe_latents(int category) const;
  std::optional<Tensor> probe_reference(int category) const;
  Tensor probe_images(int category, const ModelParams& params) const;
  double probe_mse(int category, const ModelParams& params) const;

  const std::map<std::string, Tensor>& references() const noexcept { return references_; }
  void restore_references(std::map<std::string, Tensor> refs) { references_ = std::move(refs); }

 private:
  const ProxyClassifier& proxy_;
  EvalConfig config_;
  std::uint64_t seed_;
  std::map<int, GaussianStats> real_stats_;
  std::map<int, Tensor> probes_;
  std::map<std::string, Tensor> references_;  // key "probe.<category>"
};

Tensor probe_latents(std::uint64_t seed, int category, std::size_t count, std::size_t latent_dim);

}  // namespace mergan
