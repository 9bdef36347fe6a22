#include <algorithm>
#include <string>

#include "mergan/metrics.hpp"

namespace mergan {

namespace {

constexpr std::size_t kChunk = 512;

std::string layer(std::size_t i, const char* what) { return "fc" + std::to_string(i) + "." + what; }

Tensor flat(const Tensor& t) { return t.reshaped(Shape{t.rows(), t.cols()}); }

}  // namespace

std::size_t Classifier::embedding_dim() const { return config_.hidden.empty() ? input_dim_ : config_.hidden.back(); }

Var Classifier::forward(const std::function<Var(const std::string&)>& param, Var x, bool embedding_only) const {
  Var h = x;
  for (std::size_t i = 1; i <= config_.hidden.size(); ++i) {
    h = matmul(h, param(layer(i, "weight")));
    h = leaky_relu(add(h, broadcast_rows(param(layer(i, "bias")), h.value().rows())));
  }
  if (embedding_only) return h;
  const Var logits = matmul(h, param("head.weight"));
  return add(logits, broadcast_rows(param("head.bias"), logits.value().rows()));
}

Classifier Classifier::from_params(std::size_t input_dim, std::size_t categories, const ClassifierConfig& config,
                                   TensorMap params) {
  Classifier c;
  c.input_dim_ = input_dim;
  c.categories_ = categories;
  c.config_ = config;
  std::size_t in = input_dim;
  auto expect = [&](const std::string& name, Shape shape) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("classifier parameter missing: " + name);
    if (it->second.shape() != shape) throw ShapeError("classifier parameter " + name, it->second.shape(), shape);
  };
  for (std::size_t i = 1; i <= config.hidden.size(); ++i) {
    expect(layer(i, "weight"), Shape{in, config.hidden[i - 1]});
    expect(layer(i, "bias"), Shape{1, config.hidden[i - 1]});
    in = config.hidden[i - 1];
  }
  expect("head.weight", Shape{in, categories});
  expect("head.bias", Shape{1, categories});
  const std::size_t expected = 2 * config.hidden.size() + 2;
  if (params.size() != expected) throw std::invalid_argument("classifier has unexpected extra parameters");
  c.params_ = std::move(params);
  return c;
}

Classifier Classifier::train(const Tensor& samples, std::span<const int> labels, std::size_t categories,
                             const ClassifierConfig& config, Rng& rng) {
  const std::size_t n = samples.rows();
  if (n == 0 || n != labels.size()) throw std::invalid_argument("classifier training needs matching samples and labels");
  const Tensor x = flat(samples);
  category_rows(labels, categories);

  TensorMap params;
  std::size_t in = x.cols();
  for (std::size_t i = 1; i <= config.hidden.size(); ++i) {
    Tensor w = sample_gaussian(rng, Shape{in, config.hidden[i - 1]});
    for (double& v : w.values()) v *= config.init_std;
    params.emplace(layer(i, "weight"), std::move(w));
    params.emplace(layer(i, "bias"), Tensor(Shape{1, config.hidden[i - 1]}));
    in = config.hidden[i - 1];
  }
  Tensor head = sample_gaussian(rng, Shape{in, categories});
  for (double& v : head.values()) v *= config.init_std;
  params.emplace("head.weight", std::move(head));
  params.emplace("head.bias", Tensor(Shape{1, categories}));
  Classifier c = from_params(x.cols(), categories, config, std::move(params));

  AdamState state;
  const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t d = x.cols();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    Tensor batch(Shape{config.batch_size, d});
    std::vector<int> rows(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t i = static_cast<std::size_t>(sample_category(rng, 0, static_cast<int>(n) - 1));
      std::copy_n(x.data() + i * d, d, batch.data() + b * d);
      rows[b] = labels[i] - 1;
    }
    Graph g;
    std::vector<std::string> names;
    std::vector<Var> vars;
    for (const auto& [name, t] : c.params_) {
      names.push_back(name);
      vars.push_back(g.input(t));
    }
    auto param = [&](const std::string& name) {
      const auto pos = std::lower_bound(names.begin(), names.end(), name) - names.begin();
      return vars[static_cast<std::size_t>(pos)];
    };
    const Var loss = mean_cross_entropy(c.forward(param, g.input(std::move(batch)), false), rows);
    const auto grads = g.gradients(loss, vars);
    NamedTensors named;
    for (std::size_t i = 0; i < names.size(); ++i) named.emplace_back(names[i], grads[i].value());
    adam_step(c.params_, named, state, adam);
  }
  return c;
}

namespace {

template <typename Fn>
Tensor chunked(const Tensor& samples, std::size_t out_cols, Fn&& fn) {
  const Tensor x = samples.reshaped(Shape{samples.rows(), samples.cols()});
  Tensor out(Shape{x.rows(), out_cols});
  for (std::size_t begin = 0; begin < x.rows(); begin += kChunk) {
    const std::size_t count = std::min(kChunk, x.rows() - begin);
    const Tensor part = fn(x.rows_slice(begin, count));
    std::copy(part.values().begin(), part.values().end(), out.data() + begin * out_cols);
  }
  return out;
}

}  // namespace

Tensor Classifier::logits(const Tensor& samples) const {
  if (samples.cols() != input_dim_) throw ShapeError("classifier input", samples.shape(), Shape{samples.rows(), input_dim_});
  return chunked(samples, categories_, [&](const Tensor& part) {
    Graph g;
    auto param = [&](const std::string& name) { return g.input(params_.at(name)); };
    return forward(param, g.input(part), false).value();
  });
}

Tensor Classifier::embed(const Tensor& samples) const {
  if (samples.cols() != input_dim_) throw ShapeError("classifier input", samples.shape(), Shape{samples.rows(), input_dim_});
  return chunked(samples, embedding_dim(), [&](const Tensor& part) {
    Graph g;
    auto param = [&](const std::string& name) { return g.input(params_.at(name)); };
    return forward(param, g.input(part), true).value();
  });
}

std::vector<int> Classifier::predict(const Tensor& samples) const {
  const Tensor l = logits(samples);
  std::vector<int> out(l.rows());
  for (std::size_t i = 0; i < l.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < l.cols(); ++j) {
      if (l.at(i, j) > l.at(i, best)) best = j;
    }
    out[i] = static_cast<int>(best) + 1;
  }
  return out;
}

double Classifier::accuracy(const Tensor& samples, std::span<const int> labels) const {
  if (labels.empty()) throw std::invalid_argument("accuracy of an empty set");
  const std::vector<int> predicted = predict(samples);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Tensor ProxyClassifier::embed(const Tensor& samples) const {
  if (identity_embedding) return samples.reshaped(Shape{samples.rows(), samples.cols()});
  return classifier.embed(samples);
}

namespace {

std::pair<Tensor, std::vector<int>> stack(const TaskSchedule& schedule, std::span<const int> categories, bool train) {
  std::vector<Tensor> parts;
  std::vector<int> labels;
  for (int c : categories) {
    const LabeledSet& set = train ? schedule.task(c).train : schedule.task(c).test;
    parts.push_back(flat(set.samples));
    labels.insert(labels.end(), set.labels.begin(), set.labels.end());
  }
  return {concat_rows(parts), std::move(labels)};
}

std::vector<int> all_categories(const TaskSchedule& schedule) {
  std::vector<int> out;
  for (const TaskData& t : schedule.tasks) out.push_back(t.category);
  return out;
}

}  // namespace

ProxyClassifier train_proxy(const TaskSchedule& schedule, const ClassifierConfig& config, std::uint64_t seed,
                            double min_accuracy, bool identity_embedding) {
  const std::vector<int> cats = all_categories(schedule);
  const auto [train_x, train_y] = stack(schedule, cats, true);
  const auto [test_x, test_y] = stack(schedule, cats, false);
  Rng rng = Rng(seed).split("proxy");
  ProxyClassifier proxy;
  proxy.classifier = Classifier::train(train_x, train_y, cats.size(), config, rng);
  proxy.identity_embedding = identity_embedding;
  proxy.test_accuracy = proxy.classifier.accuracy(test_x, test_y);
  if (proxy.test_accuracy < min_accuracy) {
    throw ProxyError("proxy classifier reached test accuracy " + std::to_string(proxy.test_accuracy) +
                     ", below the required " + std::to_string(min_accuracy));
  }
  return proxy;
}

std::pair<Tensor, std::vector<int>> sample_generator(const ModelParams& params, std::span<const int> categories,
                                                     std::size_t n_per_category, Rng& rng) {
  const std::size_t latent = params.architecture().latent_dim;
  std::vector<Tensor> parts;
  std::vector<int> labels;
  for (int c : categories) {
    const Tensor z = sample_gaussian(rng, Shape{n_per_category, latent});
    const std::vector<int> cs(n_per_category, c);
    parts.push_back(flat(generate_eval(params, z, cs)));
    labels.insert(labels.end(), cs.begin(), cs.end());
  }
  return {concat_rows(parts), std::move(labels)};
}

AccuracyReport accuracy_of_samples(const Tensor& samples, std::span<const int> labels,
                                   std::span<const int> categories, const ProxyClassifier& proxy) {
  const std::vector<int> predicted = proxy.classifier.predict(samples);
  AccuracyReport report;
  for (int c : categories) {
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      ++total;
      hits += predicted[i] == c;
    }
    report.categories.push_back(c);
    report.per_category.push_back(total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total));
  }
  double sum = 0.0;
  for (double a : report.per_category) sum += a;
  report.mean = report.per_category.empty() ? 0.0 : sum / static_cast<double>(report.per_category.size());
  return report;
}

AccuracyReport accuracy(const ModelParams& params, std::span<const int> categories, const ProxyClassifier& proxy,
                        std::size_t n_per_category, Rng& rng) {
  const auto [samples, labels] = sample_generator(params, categories, n_per_category, rng);
  return accuracy_of_samples(samples, labels, categories, proxy);
}

double reverse_accuracy_of_samples(const Tensor& samples, std::span<const int> labels, std::size_t categories,
                                   std::span<const int> eval_categories, const TaskSchedule& schedule,
                                   const ClassifierConfig& config, Rng& rng) {
  const Classifier c = Classifier::train(samples, labels, categories, config, rng);
  const auto [test_x, test_y] = stack(schedule, eval_categories, false);
  return c.accuracy(test_x, test_y);
}

double reverse_accuracy(const ModelParams& params, std::span<const int> categories, const TaskSchedule& schedule,
                        const ClassifierConfig& config, std::size_t n_per_category, Rng& rng) {
  const auto [samples, labels] = sample_generator(params, categories, n_per_category, rng);
  return reverse_accuracy_of_samples(samples, labels, params.architecture().categories, categories, schedule, config,
                                     rng);
}

}  // namespace mergan
