#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mergan/model.hpp"
#include "mergan/tensor.hpp"

namespace mergan {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter group. Moments are created lazily the
/// first time a parameter receives a gradient.
struct AdamState {
  std::map<std::string, Tensor, std::less<>> first;
  std::map<std::string, Tensor, std::less<>> second;
  std::uint64_t step = 0;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
using TensorMap = std::map<std::string, Tensor, std::less<>>;

/// One bias-corrected Adam update of every named parameter:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void adam_step(ModelParams& params, const NamedTensors& grads, AdamState& state, const AdamConfig& config);
void adam_step(TensorMap& params, const NamedTensors& grads, AdamState& state, const AdamConfig& config);

}  // namespace mergan
