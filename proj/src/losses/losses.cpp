#include "mergan/losses.hpp"

#include <stdexcept>

namespace mergan {

namespace {

std::vector<int> zero_based(std::span<const int> categories) {
  std::vector<int> out(categories.begin(), categories.end());
  for (int& c : out) --c;
  return out;
}

Var flatten(Var x) {
  const Tensor& v = x.value();
  return v.rank() == 2 ? x : reshape(x, Shape{v.rows(), v.cols()});
}

}  // namespace

Var gan_generator_loss(Var critic_fake) { return neg(mean(critic_fake)); }

Var gan_generator_loss(ModelGraph& model, const Tensor& z, std::span<const int> categories) {
  return gan_generator_loss(model.critic(model.generate(z, categories, NormMode::Train)));
}

Var cls_generator_loss(Var logits_fake, std::span<const int> categories) {
  const std::vector<int> labels = zero_based(categories);
  return mean_cross_entropy(logits_fake, labels);
}

Var cls_generator_loss(ModelGraph& model, const Tensor& z, std::span<const int> categories) {
  category_rows(categories, model.params().architecture().categories);
  return cls_generator_loss(model.classify(model.generate(z, categories, NormMode::Train)), categories);
}

Var weighted_objective(Var gan, Var cls, double lambda_cls) { return add(gan, scale(cls, lambda_cls)); }

Tensor sample_interpolation_weights(Rng& rng, std::size_t batch) {
  Tensor eps(Shape{batch, 1});
  for (double& e : eps.values()) e = sample_uniform01(rng);
  return eps;
}

Var interpolate(Var real, Var fake, const Tensor& eps) {
  real = flatten(real);
  fake = flatten(fake);
  if (real.shape() != fake.shape()) throw ShapeError("interpolate", real.shape(), fake.shape());
  if (eps.size() != real.value().rows()) throw ShapeError("interpolate weights", eps.shape(), real.shape());
  Graph& g = real.graph();
  const std::size_t cols = real.value().cols();
  const Var e = broadcast_cols(g.input(eps.reshaped(Shape{eps.size(), 1})), cols);
  // fake + eps * (real - fake) is exact at eps = 1 only up to rounding, so the
  // two weighted terms are formed separately.
  Tensor one_minus = eps.reshaped(Shape{eps.size(), 1});
  for (double& v : one_minus.values()) v = 1.0 - v;
  const Var f = broadcast_cols(g.input(std::move(one_minus)), cols);
  return add(mul(e, real), mul(f, fake));
}

Var gradient_penalty(const Critic& critic, Var real, Var fake, const Tensor& eps) {
  Graph& g = real.graph();
  const Var x_hat = interpolate(real, fake, eps);
  const Var scores = critic(x_hat);
  const Var grad = g.gradients(sum(scores), std::vector<Var>{x_hat})[0];
  return mean(square(add_scalar(row_l2_norm(grad), -1.0)));
}

Var gradient_penalty(ModelGraph& model, Var real, Var fake, Rng& rng) {
  const Tensor eps = sample_interpolation_weights(rng, real.value().rows());
  return gradient_penalty([&](Var x) { return model.critic(x); }, real, fake, eps);
}

Var gan_discriminator_loss(Var critic_real, Var critic_fake, Var penalty, double lambda_gp) {
  Var loss = sub(mean(critic_fake), mean(critic_real));
  if (penalty.valid()) loss = add(loss, scale(penalty, lambda_gp));
  return loss;
}

Var gan_discriminator_loss(ModelGraph& model, Var real, Var fake, const Tensor& eps, double lambda_gp) {
  fake = detach(fake);
  Var penalty;
  if (lambda_gp != 0.0) {
    penalty = gradient_penalty([&](Var x) { return model.critic(x); }, real, fake, eps);
  }
  return gan_discriminator_loss(model.critic(real), model.critic(fake), penalty, lambda_gp);
}

Var cls_discriminator_loss(Var logits_real, std::span<const int> labels) {
  const std::vector<int> rows = zero_based(labels);
  return mean_cross_entropy(logits_real, rows);
}

Var cls_discriminator_loss(ModelGraph& model, Var real, std::span<const int> labels) {
  category_rows(labels, model.params().architecture().categories);
  return cls_discriminator_loss(model.classify(real), labels);
}

FisherState estimate_fisher(const ModelParams& params, std::size_t n_samples, int previous_categories, Rng& rng) {
  if (n_samples == 0) throw std::invalid_argument("estimate_fisher: n_samples must be at least 1");
  if (previous_categories < 1) throw std::invalid_argument("estimate_fisher: needs at least one learned category");
  const std::size_t latent = params.architecture().latent_dim;
  FisherState state;
  state.samples = n_samples;
  for (const std::string& name : params.names(ParamGroup::Generator)) {
    state.information.emplace(name, Tensor(params.at(name).shape()));
    state.anchor.emplace(name, params.at(name));
  }
  for (std::size_t s = 0; s < n_samples; ++s) {
    const int c = sample_category(rng, 1, previous_categories);
    const Tensor z = sample_gaussian(rng, Shape{1, latent});
    Graph g;
    ModelGraph model(g, params);
    const auto named = model.params(ParamGroup::Generator);
    std::vector<Var> vars;
    for (const auto& [name, v] : named) vars.push_back(v);
    const int cs[] = {c};
    const Var loss = neg(sum(model.critic(model.generate(z, cs, NormMode::Eval))));
    const auto grads = g.gradients(loss, vars);
    for (std::size_t i = 0; i < named.size(); ++i) {
      Tensor& f = state.information.at(named[i].first);
      const Tensor& gv = grads[i].value();
      for (std::size_t j = 0; j < f.size(); ++j) f[j] += gv[j] * gv[j];
    }
  }
  for (auto& [name, f] : state.information) {
    for (double& v : f.values()) v /= static_cast<double>(n_samples);
  }
  return state;
}

Var ewc_penalty(ModelGraph& model, const FisherState& fisher, double lambda) {
  Graph& g = model.graph();
  Var total = g.input(Tensor::scalar(0.0));
  for (const auto& [name, information] : fisher.information) {
    const Var theta = model.param(name);
    const Var diff = sub(theta, g.input(fisher.anchor.at(name)));
    total = add(total, sum(mul(g.input(information), square(diff))));
  }
  return scale(total, 0.5 * lambda);
}

Var replay_alignment_loss(ModelGraph& live, const ModelParams& snapshot, const Tensor& z,
                          std::span<const int> categories, int task) {
  if (task < 2) throw std::invalid_argument("replay alignment needs a previous task (task >= 2)");
  category_rows(categories, static_cast<std::size_t>(task - 1));
  Graph& g = live.graph();
  ModelGraph frozen(g, snapshot);
  const Var target = detach(frozen.generate(z, categories, NormMode::Eval));
  const Var current = live.generate(z, categories, NormMode::Eval);
  return sum(square(sub(current, target)));
}

}  // namespace mergan
