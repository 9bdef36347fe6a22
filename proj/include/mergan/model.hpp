#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mergan/graph.hpp"
#include "mergan/rng.hpp"

namespace mergan {

enum class OutputMode {
  Image,   // tanh output reshaped to B x 1 x H x W
  Points,  // raw B x 2 output, for the Gaussian-mixture data
};

/// Layer sizes of the conditional generator and the shared critic/classifier
/// trunk. Defaults are the desk-scale networks used by every experiment.
struct Architecture {
  OutputMode mode = OutputMode::Image;
  std::size_t categories = 10;
  std::size_t latent_dim = 32;
  std::size_t height = 16;
  std::size_t width = 16;
  std::vector<std::size_t> generator_hidden{128, 256};
  std::vector<std::size_t> trunk_hidden{256, 128};
  double leaky_slope = kLeakySlope;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  double init_std = 0.02;

  static Architecture points(std::size_t categories);

  /// Flattened sample size: H*W for images, 2 for points.
  std::size_t data_dim() const { return mode == OutputMode::Image ? height * width : 2; }
  Shape sample_shape(std::size_t batch) const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class ParamGroup {
  Generator,      // theta^G, without the running statistics
  Discriminator,  // shared trunk + critic head
  Classifier,     // shared trunk + classifier head
  CriticAndClassifier,  // union of the two above, trunk listed once
  Buffers,        // CBN running statistics
};

/// Named parameter tensors of the whole conditional GAN.
///
/// Value semantics: copying deep-copies every tensor. snapshot() produces a
/// frozen copy with a fresh identity; frozen params reject mutable access.
class ModelParams {
 public:
  ModelParams() = default;

  /// Gaussian(0, init_std) weights, zero biases, CBN gamma = 1 and beta = 0,
  /// running mean 0 and running variance 1.
  static ModelParams initialize(const Architecture& arch, Rng& rng);

  const Architecture& architecture() const noexcept { return arch_; }
  std::uint64_t id() const noexcept { return id_; }
  bool frozen() const noexcept { return frozen_; }

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& mutable_at(std::string_view name);
  /// Replaces a tensor, which must keep its shape.
  void assign(std::string_view name, Tensor value);
  const std::map<std::string, Tensor, std::less<>>& tensors() const noexcept { return tensors_; }

  std::vector<std::string> names(ParamGroup group) const;

  ModelParams snapshot() const;

  /// Builds params from a stored tensor map; names and shapes must match the
  /// architecture exactly.
  static ModelParams from_tensors(const Architecture& arch, std::map<std::string, Tensor, std::less<>> tensors);

 private:
  Architecture arch_;
  std::map<std::string, Tensor, std::less<>> tensors_;
  std::uint64_t id_ = 0;
  bool frozen_ = false;
};

enum class NormMode {
  Train,  // batch moments; running statistics updated
  Batch,  // batch moments; running statistics left alone
  Eval,   // running statistics
};

/// ModelParams bound into one Graph. Parameters become graph inputs the first
/// time they are used, so gradients can be requested for any of them.
class ModelGraph {
 public:
  /// Train-mode generator passes update the CBN running statistics in `params`.
  ModelGraph(Graph& graph, ModelParams& params);
  /// Read-only binding; train-mode generator passes are rejected.
  ModelGraph(Graph& graph, const ModelParams& params);

  Graph& graph() const noexcept { return *graph_; }
  const ModelParams& params() const noexcept { return *params_; }

  Var param(const std::string& name);
  /// Uses `value` for the named parameter instead of a fresh input node.
  /// Must be called before the parameter is first used.
  void bind(const std::string& name, Var value);
  std::vector<std::pair<std::string, Var>> params(ParamGroup group);

  /// G(z, c). Categories are 1-based, in [1, M].
  Var generate(const Tensor& z, std::span<const int> categories, NormMode mode);
  Var generate(Var z, std::span<const int> categories, NormMode mode);

  /// Critic scores, B x 1.
  Var critic(Var x);
  /// Classifier logits, B x M.
  Var classify(Var x);

  struct Heads {
    Var critic;
    Var logits;
  };
  /// Both heads on top of one trunk evaluation.
  Heads critic_and_classify(Var x);
  /// Output of the shared trunk (penultimate activations).
  Var trunk(Var x);

 private:
  Var dense(Var x, const std::string& prefix, bool bias);
  Var conditional_batch_norm(Var h, std::size_t layer, std::span<const int> rows, NormMode mode);

  Graph* graph_;
  const ModelParams* params_;
  ModelParams* mutable_params_ = nullptr;
  std::unordered_map<std::string, Var> bound_;
};

/// Validates 1-based categories against M and converts them to row indices.
std::vector<int> category_rows(std::span<const int> categories, std::size_t m);

}  // namespace mergan
