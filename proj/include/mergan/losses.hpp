#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>

#include "mergan/graph.hpp"
#include "mergan/model.hpp"
#include "mergan/rng.hpp"

namespace mergan {

struct LossWeights {
  double cls = 1.0;
  double gp = 10.0;
  double ewc = 1e9;
  double ra = 1e-3;
};

/// Scalar values of every objective term at one training iteration.
struct LossTerms {
  double gan_g = 0.0;
  double cls_g = 0.0;
  double gan_d = 0.0;
  double gp = 0.0;
  double cls_d = 0.0;
  double ewc = 0.0;
  double ra = 0.0;
};

// ---- generator side ------------------------------------------------------

/// -mean(D(G(z, c))) from precomputed critic scores of generated samples.
Var gan_generator_loss(Var critic_fake);
/// Same, running the generator in train mode and the critic on its output.
Var gan_generator_loss(ModelGraph& model, const Tensor& z, std::span<const int> categories);

/// Mean cross-entropy of the classifier on generated samples against their
/// conditioning categories (1-based).
Var cls_generator_loss(Var logits_fake, std::span<const int> categories);
Var cls_generator_loss(ModelGraph& model, const Tensor& z, std::span<const int> categories);

/// gan + lambda_cls * cls. The weight is carried even though the usual
/// setting is lambda_cls = 1.
Var weighted_objective(Var gan, Var cls, double lambda_cls);

// ---- critic side -----------------------------------------------------------

/// Per-sample interpolation weights eps ~ U(0, 1), B x 1.
Tensor sample_interpolation_weights(Rng& rng, std::size_t batch);
/// eps * real + (1 - eps) * fake, row by row. Both inputs are flattened to B x D.
Var interpolate(Var real, Var fake, const Tensor& eps);

using Critic = std::function<Var(Var)>;
/// mean_i (||grad_x critic(x_hat_i)|| - 1)^2 at the interpolates. The result
/// stays differentiable with respect to the critic parameters.
Var gradient_penalty(const Critic& critic, Var real, Var fake, const Tensor& eps);
Var gradient_penalty(ModelGraph& model, Var real, Var fake, Rng& rng);

/// -mean D(real) + mean D(fake) + lambda_gp * penalty.
Var gan_discriminator_loss(Var critic_real, Var critic_fake, Var penalty, double lambda_gp);
/// Full critic loss. `fake` is detached first, so no gradient reaches the
/// generator. The penalty is skipped entirely when lambda_gp == 0.
Var gan_discriminator_loss(ModelGraph& model, Var real, Var fake, const Tensor& eps, double lambda_gp);

/// Mean cross-entropy of the classifier on real samples with 1-based labels.
Var cls_discriminator_loss(Var logits_real, std::span<const int> labels);
Var cls_discriminator_loss(ModelGraph& model, Var real, std::span<const int> labels);

// ---- forgetting prevention -------------------------------------------------

/// Diagonal empirical Fisher information of the generator, with the anchor
/// parameters it was computed at.
struct FisherState {
  std::map<std::string, Tensor, std::less<>> information;
  std::map<std::string, Tensor, std::less<>> anchor;
  std::size_t samples = 0;
};

/// F_i = mean over single-sample draws (z ~ N(0, I), c ~ U{1, previous}) of
/// (d(-D(G(z, c))) / d theta_i)^2. The generator runs in eval mode, since
/// batch statistics of a single sample are degenerate.
FisherState estimate_fisher(const ModelParams& params, std::size_t n_samples, int previous_categories, Rng& rng);

/// sum_i lambda/2 * F_i * (theta_i - anchor_i)^2 over the generator parameters.
Var ewc_penalty(ModelGraph& model, const FisherState& fisher, double lambda);

/// Squared L2 norm of G_t(z, c) - G_{t-1}(z, c) over the whole replay batch
/// (summed over samples and pixels), both generators in eval mode. `task` is the current task t; categories must lie in [1, t-1].
Var replay_alignment_loss(ModelGraph& live, const ModelParams& snapshot, const Tensor& z,
                          std::span<const int> categories, int task);

}  // namespace mergan
