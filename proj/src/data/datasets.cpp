#include <string>

#include "mergan/data.hpp"

namespace mergan {

const TaskData& TaskSchedule::task(int t) const {
  if (t < 1 || static_cast<std::size_t>(t) > tasks.size()) {
    throw std::out_of_range("task " + std::to_string(t) + " outside schedule of " + std::to_string(tasks.size()));
  }
  return tasks[static_cast<std::size_t>(t - 1)];
}

void TaskSchedule::validate() const {
  if (tasks.empty()) throw std::invalid_argument("task schedule is empty");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TaskData& task = tasks[i];
    const int expected = static_cast<int>(i + 1);
    if (task.category != expected) {
      throw std::invalid_argument("task " + std::to_string(expected) + " holds category " +
                                  std::to_string(task.category));
    }
    for (const LabeledSet* set : {&task.train, &task.test}) {
      if (set->samples.rows() != set->size()) {
        throw std::invalid_argument("task " + std::to_string(expected) + ": sample and label counts differ");
      }
      for (int label : set->labels) {
        if (label != expected) {
          throw std::invalid_argument("task " + std::to_string(expected) + " is not category-pure (label " +
                                      std::to_string(label) + ")");
        }
      }
    }
    if (task.train.size() == 0) {
      throw std::invalid_argument("task " + std::to_string(expected) + " has no training samples");
    }
  }
}

Tensor generate_eval(const ModelParams& params, const Tensor& z, std::span<const int> categories) {
  Graph graph;
  ModelGraph model(graph, params);
  return model.generate(z, categories, NormMode::Eval).value();
}

std::pair<Tensor, std::vector<int>> replay_batch(const ModelParams& snapshot, Rng& rng, std::size_t batch, int t) {
  if (t < 2) throw std::invalid_argument("replay needs a previous task (t >= 2), got t = " + std::to_string(t));
  std::vector<int> labels = sample_categories(rng, batch, 1, t - 1);
  const Tensor z = sample_gaussian(rng, Shape{batch, snapshot.architecture().latent_dim});
  return {generate_eval(snapshot, z, labels), std::move(labels)};
}

}  // namespace mergan
