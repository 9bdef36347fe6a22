#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mergan/adam.hpp"
#include "mergan/losses.hpp"
#include "mergan/model.hpp"

using namespace mergan;

namespace {

Architecture small_arch() {
  Architecture a;
  a.categories = 4;
  a.latent_dim = 8;
  a.height = 4;
  a.width = 4;
  a.generator_hidden = {12, 10};
  a.trunk_hidden = {10, 6};
  a.init_std = 0.3;
  return a;
}

Tensor run_generator(const ModelParams& p, const Tensor& z, const std::vector<int>& c) {
  Graph g;
  ModelGraph m(g, p);
  return m.generate(z, c, NormMode::Eval).value();
}

Tensor run_generator_train(ModelParams& p, const Tensor& z, const std::vector<int>& c) {
  Graph g;
  ModelGraph m(g, p);
  return m.generate(z, c, NormMode::Train).value();
}

void randomize_banks(ModelParams& p, Rng& rng) {
  for (const auto& name : p.names(ParamGroup::Generator)) {
    if (name.find("gamma") == std::string::npos && name.find("beta") == std::string::npos) continue;
    for (double& v : p.mutable_at(name).values()) v += 0.5 * sample_standard_normal(rng);
  }
}

}  // namespace

TEST_CASE("generator output shape and tanh range") {
  Rng rng(1);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  p.mutable_at("G.out.weight") = sample_gaussian(rng, p.at("G.out.weight").shape());  // push into saturation
  for (double& v : p.mutable_at("G.out.weight").values()) v *= 5.0;
  const Tensor z = sample_gaussian(rng, Shape{1000, 8});
  const std::vector<int> c = sample_categories(rng, 1000, 1, 4);
  const Tensor x = run_generator_train(p, z, c);
  CHECK(x.shape() == Shape{1000, 1, 4, 4});
  for (double v : x.values()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("points mode has no output nonlinearity") {
  Rng rng(2);
  Architecture a = Architecture::points(3);
  a.init_std = 1.0;
  ModelParams p = ModelParams::initialize(a, rng);
  const Tensor z = sample_gaussian(rng, Shape{200, a.latent_dim});
  const Tensor x = run_generator(p, z, sample_categories(rng, 200, 1, 3));
  CHECK(x.shape() == Shape{200, 2});
  CHECK(x.max_abs() > 1.0);
}

TEST_CASE("identity banks make the output independent of the category") {
  Rng rng(3);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  const Tensor z = sample_gaussian(rng, Shape{1, 8}).reshaped(Shape{1, 8});
  Tensor zz(Shape{4, 8});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 8; ++j) zz.at(r, j) = z[j];
  const Tensor x = run_generator(p, zz, {1, 2, 3, 4});
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t j = 0; j < 16; ++j) CHECK(x.at(r, j) == x.at(0, j));
}

namespace {

void check_selectivity(const ModelParams& p, const char* bank, NormMode mode, const Tensor& z, const std::vector<int>& c) {
  ModelParams a = p, b = p;
  Tensor& row = b.mutable_at(bank);
  for (std::size_t j = 0; j < row.cols(); ++j) row.at(2, j) += 0.7;  // category 3
  Graph ga, gb;
  ModelGraph ma(ga, a), mb(gb, b);
  const Tensor xa = ma.generate(z, c, mode).value();
  const Tensor xb = mb.generate(z, c, mode).value();
  bool touched = false;
  for (std::size_t r = 0; r < c.size(); ++r) {
    bool same = true;
    for (std::size_t j = 0; j < xa.cols(); ++j) same = same && xa.at(r, j) == xb.at(r, j);
    if (c[r] == 3) touched = touched || !same;
    else CHECK(same);
  }
  CHECK(touched);
}

}  // namespace

TEST_CASE("CBN selectivity: perturbing one bank row only touches that category") {
  Rng rng(4);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  randomize_banks(p, rng);
  const Tensor z = sample_gaussian(rng, Shape{16, 8});
  std::vector<int> c = sample_categories(rng, 16, 1, 4);
  c[0] = 3;
  for (const char* bank : {"G.cbn1.gamma", "G.cbn1.beta", "G.cbn2.gamma", "G.cbn2.beta"}) {
    check_selectivity(p, bank, NormMode::Eval, z, c);
  }
  // Batch moments are shared across categories, so in train mode a first-layer
  // bank change reaches other rows through the next layer's moments. The last
  // CBN layer feeds no further normalization and stays selective.
  check_selectivity(p, "G.cbn2.gamma", NormMode::Train, z, c);
  check_selectivity(p, "G.cbn2.beta", NormMode::Train, z, c);
}

TEST_CASE("train mode updates running statistics, eval mode does not") {
  Rng rng(5);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  const Tensor before = p.at("G.cbn1.running_mean");
  const Tensor z = sample_gaussian(rng, Shape{8, 8});
  const std::vector<int> c(8, 1);
  run_generator(p, z, c);
  CHECK(p.at("G.cbn1.running_mean") == before);
  // Oracle: running = 0.9 * running + 0.1 * batch mean of the first dense layer.
  Tensor h(Shape{8, 12});
  const Tensor& w = p.at("G.fc1.weight");
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t k = 0; k < 12; ++k)
      for (std::size_t j = 0; j < 8; ++j) h.at(r, k) += z.at(r, j) * w.at(j, k);
  run_generator_train(p, z, c);
  for (std::size_t k = 0; k < 12; ++k) {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < 8; ++r) m += h.at(r, k) / 8.0;
    for (std::size_t r = 0; r < 8; ++r) v += (h.at(r, k) - m) * (h.at(r, k) - m) / 8.0;
    CHECK(p.at("G.cbn1.running_mean")[k] == doctest::Approx(0.1 * m).epsilon(1e-12));
    CHECK(p.at("G.cbn1.running_var")[k] == doctest::Approx(0.9 + 0.1 * v).epsilon(1e-12));
    CHECK(p.at("G.cbn1.running_var")[k] > 0.0);
  }
}

TEST_CASE("eval mode is deterministic") {
  Rng rng(6);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  const Tensor z = sample_gaussian(rng, Shape{5, 8});
  const std::vector<int> c{1, 2, 3, 4, 1};
  CHECK(run_generator(p, z, c) == run_generator(p, z, c));
}

TEST_CASE("generator input validation") {
  Rng rng(7);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  CHECK_THROWS_AS(run_generator(p, sample_gaussian(rng, Shape{2, 8}), {1, 5}), std::out_of_range);
  CHECK_THROWS_AS(run_generator(p, sample_gaussian(rng, Shape{2, 8}), {0, 1}), std::out_of_range);
  CHECK_THROWS_AS(run_generator(p, Tensor(Shape{0, 8}), {}), std::invalid_argument);
  CHECK_THROWS_AS(run_generator(p, sample_gaussian(rng, Shape{2, 7}), {1, 1}), ShapeError);
  const ModelParams& cp = p;
  Graph g;
  ModelGraph ro(g, cp);
  CHECK_THROWS(ro.generate(sample_gaussian(rng, Shape{2, 8}), std::vector<int>{1, 2}, NormMode::Train));
}

TEST_CASE("critic: zero head, batch independence, extremes") {
  Rng rng(8);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  const Tensor x = sample_gaussian(rng, Shape{6, 1, 4, 4});
  {
    ModelParams zero = p;
    for (double& v : zero.mutable_at("D.critic.weight").values()) v = 0.0;
    Graph g;
    ModelGraph m(g, zero);
    const Tensor s = m.critic(g.input(x)).value();
    CHECK(s.shape() == Shape{6, 1});
    for (double v : s.values()) CHECK(v == 0.0);
  }
  Graph g;
  ModelGraph m(g, p);
  const Tensor all = m.critic(g.input(x)).value();
  for (std::size_t r = 0; r < 6; ++r) {
    const Tensor one = m.critic(g.input(x.rows_slice(r, 1))).value();
    CHECK(one[0] == doctest::Approx(all[r]).epsilon(1e-14));
  }
  const Tensor ext = m.critic(g.input(Tensor(Shape{2, 16}, 1.0))).value();
  const Tensor ext2 = m.critic(g.input(Tensor(Shape{2, 16}, -1.0))).value();
  CHECK(ext.all_finite());
  CHECK(ext2.all_finite());
  CHECK_THROWS_AS(m.critic(g.input(Tensor(Shape{2, 15}))), ShapeError);
}

TEST_CASE("classifier: zero head gives ln M, shapes, trunk shared once") {
  Rng rng(9);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  const Tensor x = sample_gaussian(rng, Shape{5, 16});
  {
    ModelParams zero = p;
    for (double& v : zero.mutable_at("C.head.weight").values()) v = 0.0;
    Graph g;
    ModelGraph m(g, zero);
    const Var logits = m.classify(g.input(x));
    CHECK(logits.shape() == Shape{5, 4});
    const std::vector<int> labels{0, 1, 2, 3, 0};
    CHECK(mean_cross_entropy(logits, labels).value().item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  // Oracle: separate evaluation runs the trunk twice; joint evaluation once.
  Graph separate, joint;
  ModelGraph ms(separate, p), mj(joint, p);
  const Var xs = separate.input(x), xj = joint.input(x);
  ms.critic(xs);
  ms.classify(xs);
  const auto heads = mj.critic_and_classify(xj);
  const std::size_t trunk_matmuls = small_arch().trunk_hidden.size();
  CHECK(separate.count(Op::MatMul) == 2 * trunk_matmuls + 2);
  CHECK(joint.count(Op::MatMul) == trunk_matmuls + 2);
  CHECK(heads.critic.shape() == Shape{5, 1});
  CHECK(heads.logits.shape() == Shape{5, 4});
}

TEST_CASE("classifier loss reaches trunk parameters") {
  Rng rng(10);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  Graph g;
  ModelGraph m(g, p);
  const std::vector<int> labels{1, 2, 3, 4};
  const Var loss = cls_discriminator_loss(m, g.input(sample_gaussian(rng, Shape{4, 16})), labels);
  const Var w = m.param("D.fc1.weight");
  const Var grad = g.gradients(loss, std::vector<Var>{w})[0];
  CHECK(grad.value().max_abs() > 0.0);
}

TEST_CASE("parameter groups share the trunk exactly once") {
  Rng rng(11);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  const auto d = p.names(ParamGroup::Discriminator);
  const auto c = p.names(ParamGroup::Classifier);
  const auto both = p.names(ParamGroup::CriticAndClassifier);
  std::size_t trunk = 0;
  for (const auto& n : d) trunk += std::find(c.begin(), c.end(), n) != c.end();
  CHECK(trunk == 2 * small_arch().trunk_hidden.size());
  CHECK(both.size() == d.size() + c.size() - trunk);
  std::set<std::string> unique(both.begin(), both.end());
  CHECK(unique.size() == both.size());
  for (const auto& n : p.names(ParamGroup::Generator)) CHECK(n.rfind("G.", 0) == 0);
  for (const auto& n : p.names(ParamGroup::Buffers)) CHECK(n.find("running") != std::string::npos);
}

TEST_CASE("snapshot isolation and idempotence") {
  Rng rng(12);
  ModelParams live = ModelParams::initialize(small_arch(), rng);
  randomize_banks(live, rng);
  const ModelParams snap = live.snapshot();
  CHECK(snap.frozen());
  CHECK(snap.id() != live.id());
  CHECK(snap.tensors() == live.tensors());
  const ModelParams snap2 = snap.snapshot();
  CHECK(snap2.tensors() == snap.tensors());

  const Tensor z = sample_gaussian(rng, Shape{4, 8});
  const std::vector<int> c{1, 2, 3, 4};
  CHECK(run_generator(snap, z, c) == run_generator(live, z, c));

  const auto original = snap.tensors();
  AdamState state;
  for (int step = 0; step < 5; ++step) {
    Graph g;
    ModelGraph m(g, live);
    const Var loss = gan_generator_loss(m, z, c);
    std::vector<Var> vars;
    const auto named = m.params(ParamGroup::Generator);
    for (const auto& [n, v] : named) vars.push_back(v);
    const auto grads = g.gradients(loss, vars);
    NamedTensors gt;
    for (std::size_t i = 0; i < named.size(); ++i) gt.emplace_back(named[i].first, grads[i].value());
    adam_step(live, gt, state, AdamConfig{1e-2});
  }
  CHECK(snap.tensors() == original);
  CHECK(live.tensors() != original);
  ModelParams frozen = snap;
  CHECK(frozen.frozen());
  CHECK_THROWS_AS(frozen.mutable_at("G.out.bias"), std::logic_error);
}

TEST_CASE("from_tensors validates layout") {
  Rng rng(13);
  ModelParams p = ModelParams::initialize(small_arch(), rng);
  auto tensors = p.tensors();
  const ModelParams q = ModelParams::from_tensors(small_arch(), tensors);
  CHECK(q.tensors() == p.tensors());
  auto missing = tensors;
  missing.erase("G.out.bias");
  CHECK_THROWS(ModelParams::from_tensors(small_arch(), missing));
  auto wrong = tensors;
  wrong["G.out.bias"] = Tensor(Shape{1, 3});
  CHECK_THROWS(ModelParams::from_tensors(small_arch(), wrong));
}
