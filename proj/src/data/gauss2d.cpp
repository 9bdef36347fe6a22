#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "mergan/data.hpp"

namespace mergan {

void Gauss2DSpec::validate() const {
  if (means.empty()) throw std::invalid_argument("gauss2d spec needs at least one component");
  if (!(sigma > 0.0)) throw std::invalid_argument("gauss2d sigma must be positive");
  if (!weights.empty()) {
    if (weights.size() != means.size()) throw std::invalid_argument("gauss2d weights and means differ in count");
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("gauss2d weights must be nonnegative");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("gauss2d weights must sum to 1");
  }
}

Tensor sample_gauss2d(const Gauss2DSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  const std::size_t k = spec.means.size();
  Tensor points(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t component = 0;
    if (k > 1) {
      const double u = sample_uniform01(rng);
      if (spec.weights.empty()) {
        component = std::min(k - 1, static_cast<std::size_t>(u * static_cast<double>(k)));
      } else {
        double acc = 0.0;
        component = k - 1;
        for (std::size_t j = 0; j < k; ++j) {
          acc += spec.weights[j];
          if (u < acc) {
            component = j;
            break;
          }
        }
      }
    }
    points.at(i, 0) = spec.means[component][0] + spec.sigma * sample_standard_normal(rng);
    points.at(i, 1) = spec.means[component][1] + spec.sigma * sample_standard_normal(rng);
  }
  return points;
}

TaskSchedule make_gauss2d_tasks(std::uint64_t seed, const std::vector<Gauss2DSpec>& specs, std::size_t n_train,
                                std::size_t n_test) {
  if (specs.empty()) throw std::invalid_argument("gauss2d tasks need at least one category");
  const Rng root(seed);
  TaskSchedule schedule;
  for (std::size_t c = 1; c <= specs.size(); ++c) {
    TaskData task;
    task.category = static_cast<int>(c);
    Rng train = root.split("gauss2d-train", c);
    Rng test = root.split("gauss2d-test", c);
    task.train = {sample_gauss2d(specs[c - 1], n_train, train), std::vector<int>(n_train, task.category), Split::Train};
    task.test = {sample_gauss2d(specs[c - 1], n_test, test), std::vector<int>(n_test, task.category), Split::Test};
    schedule.tasks.push_back(std::move(task));
  }
  return schedule;
}

std::vector<Gauss2DSpec> ring_gauss2d(std::size_t categories, double radius, double sigma) {
  std::vector<Gauss2DSpec> specs;
  for (std::size_t c = 0; c < categories; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(categories);
    specs.push_back({{{radius * std::cos(angle), radius * std::sin(angle)}}, sigma, {}});
  }
  return specs;
}

}  // namespace mergan
