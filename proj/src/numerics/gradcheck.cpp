#include "mergan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mergan {

namespace {

double evaluate(const ScalarBuilder& fn, std::span<const Tensor> point) {
  Graph g;
  std::vector<Var> inputs;
  inputs.reserve(point.size());
  for (const Tensor& t : point) inputs.push_back(g.input(t));
  return fn(g, inputs).value().item();
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarBuilder& fn, std::span<const Tensor> point, double h,
                                  double tolerance) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");

  std::vector<double> analytic;
  {
    Graph g;
    std::vector<Var> inputs;
    for (const Tensor& t : point) inputs.push_back(g.input(t));
    const Var loss = fn(g, inputs);
    for (const Var& grad : g.gradients(loss, inputs)) {
      analytic.insert(analytic.end(), grad.value().values().begin(), grad.value().values().end());
    }
  }

  std::vector<Tensor> probe(point.begin(), point.end());
  std::vector<double> numeric;
  numeric.reserve(analytic.size());
  for (Tensor& t : probe) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double original = t[i];
      t[i] = original + h;
      const double plus = evaluate(fn, probe);
      t[i] = original - h;
      const double minus = evaluate(fn, probe);
      t[i] = original;
      numeric.push_back((plus - minus) / (2.0 * h));
    }
  }

  double scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  const double floor = std::max(1e-3 * scale, 1e-12);

  GradCheckReport report;
  report.tolerance = tolerance;
  report.coordinates = numeric.size();
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    const double err = std::abs(analytic[i] - numeric[i]) / denom;
    report.max_rel_error = std::max(report.max_rel_error, std::isfinite(err) ? err : INFINITY);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace mergan
