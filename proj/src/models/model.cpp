#include "mergan/model.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace mergan {

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

std::string layer_name(const char* prefix, std::size_t index, const char* suffix) {
  return std::string(prefix) + std::to_string(index) + "." + suffix;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }
bool is_buffer(std::string_view name) { return name.find(".running_") != std::string_view::npos; }

// Expected name -> shape table, in creation order.
std::vector<std::pair<std::string, Shape>> layout(const Architecture& a) {
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t m = a.categories;
  std::size_t in = a.latent_dim;
  for (std::size_t i = 0; i < a.generator_hidden.size(); ++i) {
    const std::size_t width = a.generator_hidden[i];
    out.emplace_back(layer_name("G.fc", i + 1, "weight"), Shape{in, width});
    out.emplace_back(layer_name("G.cbn", i + 1, "gamma"), Shape{m, width});
    out.emplace_back(layer_name("G.cbn", i + 1, "beta"), Shape{m, width});
    out.emplace_back(layer_name("G.cbn", i + 1, "running_mean"), Shape{1, width});
    out.emplace_back(layer_name("G.cbn", i + 1, "running_var"), Shape{1, width});
    in = width;
  }
  out.emplace_back("G.out.weight", Shape{in, a.data_dim()});
  out.emplace_back("G.out.bias", Shape{1, a.data_dim()});

  in = a.data_dim();
  for (std::size_t i = 0; i < a.trunk_hidden.size(); ++i) {
    out.emplace_back(layer_name("D.fc", i + 1, "weight"), Shape{in, a.trunk_hidden[i]});
    out.emplace_back(layer_name("D.fc", i + 1, "bias"), Shape{1, a.trunk_hidden[i]});
    in = a.trunk_hidden[i];
  }
  out.emplace_back("D.critic.weight", Shape{in, 1});
  out.emplace_back("D.critic.bias", Shape{1, 1});
  out.emplace_back("C.head.weight", Shape{in, m});
  out.emplace_back("C.head.bias", Shape{1, m});
  return out;
}

}  // namespace

Architecture Architecture::points(std::size_t categories) {
  Architecture a;
  a.mode = OutputMode::Points;
  a.categories = categories;
  a.height = 1;
  a.width = 2;
  return a;
}

Shape Architecture::sample_shape(std::size_t batch) const {
  return mode == OutputMode::Image ? Shape{batch, 1, height, width} : Shape{batch, 2};
}

std::vector<int> category_rows(std::span<const int> categories, std::size_t m) {
  if (categories.empty()) throw std::invalid_argument("empty batch: at least one category is required");
  std::vector<int> rows(categories.size());
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const int c = categories[i];
    if (c < 1 || static_cast<std::size_t>(c) > m) {
      throw std::out_of_range("category " + std::to_string(c) + " outside [1, " + std::to_string(m) + "]");
    }
    rows[i] = c - 1;
  }
  return rows;
}

// ---- ModelParams -------------------------------------------------------------

ModelParams ModelParams::initialize(const Architecture& arch, Rng& rng) {
  if (arch.categories == 0 || arch.latent_dim == 0) throw std::invalid_argument("architecture sizes must be positive");
  ModelParams p;
  p.arch_ = arch;
  p.id_ = next_id();
  for (auto& [name, shape] : layout(arch)) {
    Tensor t(shape);
    if (name.ends_with(".weight")) {
      for (double& v : t.values()) v = arch.init_std * sample_standard_normal(rng);
    } else if (name.ends_with(".gamma") || name.ends_with(".running_var")) {
      for (double& v : t.values()) v = 1.0;
    }
    p.tensors_.emplace(name, std::move(t));
  }
  return p;
}

ModelParams ModelParams::from_tensors(const Architecture& arch, std::map<std::string, Tensor, std::less<>> tensors) {
  const auto expected = layout(arch);
  if (expected.size() != tensors.size()) {
    throw std::invalid_argument("parameter set has " + std::to_string(tensors.size()) + " tensors, architecture needs " +
                                std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::invalid_argument("missing parameter " + name);
    if (it->second.shape() != shape) throw ShapeError("parameter " + name, shape, it->second.shape());
  }
  ModelParams p;
  p.arch_ = arch;
  p.id_ = next_id();
  p.tensors_ = std::move(tensors);
  return p;
}

bool ModelParams::contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }

const Tensor& ModelParams::at(std::string_view name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
  return it->second;
}

Tensor& ModelParams::mutable_at(std::string_view name) {
  if (frozen_) throw std::logic_error("parameter " + std::string(name) + " belongs to a frozen snapshot");
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
  return it->second;
}

void ModelParams::assign(std::string_view name, Tensor value) {
  Tensor& slot = mutable_at(name);
  if (slot.shape() != value.shape()) throw ShapeError("assign " + std::string(name), slot.shape(), value.shape());
  slot = std::move(value);
}

std::vector<std::string> ModelParams::names(ParamGroup group) const {
  std::vector<std::string> out;
  for (const auto& [name, tensor] : tensors_) {
    bool keep = false;
    switch (group) {
      case ParamGroup::Generator: keep = starts_with(name, "G.") && !is_buffer(name); break;
      case ParamGroup::Buffers: keep = is_buffer(name); break;
      case ParamGroup::Discriminator: keep = starts_with(name, "D."); break;
      case ParamGroup::Classifier: keep = starts_with(name, "D.fc") || starts_with(name, "C."); break;
      case ParamGroup::CriticAndClassifier: keep = starts_with(name, "D.") || starts_with(name, "C."); break;
    }
    if (keep) out.push_back(name);
  }
  return out;
}

ModelParams ModelParams::snapshot() const {
  ModelParams copy = *this;
  copy.id_ = next_id();
  copy.frozen_ = true;
  return copy;
}

// ---- ModelGraph ---------------------------------------------------------------

ModelGraph::ModelGraph(Graph& graph, ModelParams& params)
    : graph_(&graph), params_(&params), mutable_params_(params.frozen() ? nullptr : &params) {}

ModelGraph::ModelGraph(Graph& graph, const ModelParams& params) : graph_(&graph), params_(&params) {}

Var ModelGraph::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Var v = graph_->input(params_->at(name));
  bound_.emplace(name, v);
  return v;
}

void ModelGraph::bind(const std::string& name, Var value) {
  const Tensor& stored = params_->at(name);
  if (stored.shape() != value.shape()) throw ShapeError("bind " + name, stored.shape(), value.shape());
  if (!bound_.emplace(name, value).second) throw std::logic_error("parameter already bound: " + name);
}

std::vector<std::pair<std::string, Var>> ModelGraph::params(ParamGroup group) {
  std::vector<std::pair<std::string, Var>> out;
  for (const std::string& name : params_->names(group)) out.emplace_back(name, param(name));
  return out;
}

Var ModelGraph::dense(Var x, const std::string& prefix, bool bias) {
  Var h = matmul(x, param(prefix + ".weight"));
  if (bias) h = add(h, broadcast_rows(param(prefix + ".bias"), h.value().rows()));
  return h;
}

Var ModelGraph::conditional_batch_norm(Var h, std::size_t layer, std::span<const int> rows, NormMode mode) {
  const Architecture& a = params_->architecture();
  const std::string prefix = "G.cbn" + std::to_string(layer) + ".";
  const std::size_t batch = h.value().rows();
  Var normalized;
  if (mode != NormMode::Eval) {
    const Moments moments = batch_moments(h);
    const Var std_dev = sqrt(add_scalar(moments.variance, a.bn_eps));
    normalized = div(sub(h, broadcast_rows(moments.mean, batch)), broadcast_rows(std_dev, batch));
    if (mode == NormMode::Train) {
      if (mutable_params_ == nullptr) {
        throw std::logic_error("train-mode generator pass needs mutable (non-snapshot) parameters");
      }
      Tensor& running_mean = mutable_params_->mutable_at(prefix + "running_mean");
      Tensor& running_var = mutable_params_->mutable_at(prefix + "running_var");
      const double m = a.bn_momentum;
      for (std::size_t j = 0; j < running_mean.size(); ++j) {
        running_mean[j] = m * running_mean[j] + (1.0 - m) * moments.mean.value()[j];
        running_var[j] = m * running_var[j] + (1.0 - m) * moments.variance.value()[j];
      }
    }
  } else {
    Tensor mean_t = params_->at(prefix + "running_mean");
    Tensor std_t = params_->at(prefix + "running_var");
    for (double& v : std_t.values()) v = std::sqrt(v + a.bn_eps);
    normalized = div(sub(h, broadcast_rows(graph_->input(std::move(mean_t)), batch)),
                     broadcast_rows(graph_->input(std::move(std_t)), batch));
  }
  const Var gamma = gather_rows(param(prefix + "gamma"), rows);
  const Var beta = gather_rows(param(prefix + "beta"), rows);
  return add(mul(normalized, gamma), beta);
}

Var ModelGraph::generate(const Tensor& z, std::span<const int> categories, NormMode mode) {
  return generate(graph_->input(z), categories, mode);
}

Var ModelGraph::generate(Var z, std::span<const int> categories, NormMode mode) {
  const Architecture& a = params_->architecture();
  const std::vector<int> rows = category_rows(categories, a.categories);
  if (z.value().rows() != rows.size() || z.value().cols() != a.latent_dim) {
    throw ShapeError("generator input", z.shape(), Shape{rows.size(), a.latent_dim});
  }
  Var h = z.value().rank() == 2 ? z : reshape(z, Shape{rows.size(), a.latent_dim});
  for (std::size_t i = 1; i <= a.generator_hidden.size(); ++i) {
    h = dense(h, "G.fc" + std::to_string(i), false);
    h = leaky_relu(conditional_batch_norm(h, i, rows, mode), a.leaky_slope);
  }
  h = dense(h, "G.out", true);
  if (a.mode == OutputMode::Image) h = reshape(tanh(h), a.sample_shape(rows.size()));
  return h;
}

Var ModelGraph::trunk(Var x) {
  const Architecture& a = params_->architecture();
  const std::size_t batch = x.value().rows();
  if (x.value().cols() != a.data_dim()) throw ShapeError("discriminator input", x.shape(), a.sample_shape(batch));
  Var h = x.value().rank() == 2 ? x : reshape(x, Shape{batch, a.data_dim()});
  for (std::size_t i = 1; i <= a.trunk_hidden.size(); ++i) {
    h = leaky_relu(dense(h, "D.fc" + std::to_string(i), true), a.leaky_slope);
  }
  return h;
}

Var ModelGraph::critic(Var x) { return dense(trunk(x), "D.critic", true); }

Var ModelGraph::classify(Var x) { return dense(trunk(x), "C.head", true); }

ModelGraph::Heads ModelGraph::critic_and_classify(Var x) {
  const Var features = trunk(x);
  return {dense(features, "D.critic", true), dense(features, "C.head", true)};
}

}  // namespace mergan
