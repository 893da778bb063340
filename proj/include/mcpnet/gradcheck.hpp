#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "mcpnet/autodiff.hpp"

namespace mcpnet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;
  Index worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

inline constexpr double kGradCheckStep = 1e-3;

// Finite-difference verification of reverse-mode gradients, 64-bit only.
// `build` assembles a scalar-valued graph from leaves created for `inputs`;
// it is re-invoked for every perturbed evaluation, so it must be a pure
// function of the leaf values. Relative error per element is
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
using GradCheckFn =
    std::function<NodeRef<double>(Tape<double>&, const std::vector<NodeRef<double>>&)>;

inline GradCheckReport gradcheck(const GradCheckFn& build, std::vector<Tensor<double>> inputs,
                                 double step = kGradCheckStep) {
  // Analytic pass.
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<NodeRef<double>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, /*requires_grad=*/true));
    NodeRef<double> y = build(tape, leaves);
    tape.backward(y);
    for (NodeRef<double> leaf : leaves) analytic.push_back(leaf->grad);
  }

  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<NodeRef<double>> leaves;
    leaves.reserve(xs.size());
    for (const auto& t : xs) leaves.push_back(tape.leaf(t, /*requires_grad=*/false));
    return build(tape, leaves)->value.value();
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index e = 0; e < inputs[i].numel(); ++e) {
      const double saved = inputs[i].data[e];
      inputs[i].data[e] = saved + step;
      const double up = evaluate(inputs);
      inputs[i].data[e] = saved - step;
      const double down = evaluate(inputs);
      inputs[i].data[e] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i].data[e];
      const double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > report.max_rel_err) {
        report = {rel, i, e, a, numeric};
      }
    }
  }
  return report;
}

}  // namespace mcpnet
