#include "mergan/adam.hpp"

#include <cmath>

namespace mergan {

namespace {

template <typename Lookup>
void apply(Lookup&& lookup, const NamedTensors& grads, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, grad] : grads) {
    Tensor& param = lookup(name);
    if (param.shape() != grad.shape()) throw ShapeError("adam_step " + name, param.shape(), grad.shape());
    Tensor& m = state.first.try_emplace(name, grad.shape()).first->second;
    Tensor& v = state.second.try_emplace(name, grad.shape()).first->second;
    if (m.shape() != grad.shape()) throw ShapeError("adam_step moments " + name, m.shape(), grad.shape());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      param[i] -= cfg.learning_rate * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + cfg.epsilon);
    }
  }
}

}  // namespace

void adam_step(ModelParams& params, const NamedTensors& grads, AdamState& state, const AdamConfig& config) {
  apply([&](const std::string& name) -> Tensor& { return params.mutable_at(name); }, grads, state, config);
}

void adam_step(TensorMap& params, const NamedTensors& grads, AdamState& state, const AdamConfig& config) {
  apply(
      [&](const std::string& name) -> Tensor& {
        auto it = params.find(name);
        if (it == params.end()) throw std::out_of_range("adam_step: unknown parameter " + name);
        return it->second;
      },
      grads, state, config);
}

}  // namespace mergan
