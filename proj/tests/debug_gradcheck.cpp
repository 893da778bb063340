// Scratch harness for diagnosing full-model gradcheck failures.
#include <cstdio>
#include <vector>

#include "mcpnet/gradcheck.hpp"
#include "mcpnet/model.hpp"
#include "mcpnet/train.hpp"

using namespace mcpnet;

int main() {
  for (std::uint64_t round = 0; round < 5; ++round) {
    Rng rng(mix_seed(0, round * 1000 + 7));
    const MCPNetConfig cfg = MCPNetConfig::make(1, 3, 8, {1, 16});
    MCPNet<double> net = MCPNet<double>::init(cfg, rng.next_u64());

    LabeledPointSet sample;
    sample.base.points.resize(8, 2);
    for (Index i = 0; i < 8; ++i) {
      sample.base.points(i, 0) = static_cast<float>(rng.uniform());
      sample.base.points(i, 1) = static_cast<float>(rng.uniform());
    }
    sample.base.n_original = 8;
    sample.labels.resize(8);
    for (auto& l : sample.labels) l = static_cast<int>(rng.index(3));

    std::vector<Tensor<double>> params;
    net.visit_trainable(
        [&params](Tensor<double>& t, typename MCPNet<double>::ParamKind) { params.push_back(t); });

    auto build = [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
      BoundModel<double> bound;
      std::size_t j = 0;
      for (int col = 0; col < net.num_columns(); ++col) {
        std::array<typename BoundModel<double>::Conv, 3> convs;
        std::array<typename BoundModel<double>::Norm, 3> norms;
        for (int l = 0; l < 3; ++l) {
          convs[static_cast<std::size_t>(l)] = {in[j], in[j + 1]};
          norms[static_cast<std::size_t>(l)] = {in[j + 2], in[j + 3]};
          j += 4;
        }
        bound.column_convs.push_back(convs);
        bound.column_norms.push_back(norms);
      }
      for (int l = 0; l < 4; ++l) {
        bound.head_convs.push_back({in[j], in[j + 1]});
        bound.head_norms.push_back({in[j + 2], in[j + 3]});
        j += 4;
      }
      bound.head_convs.push_back({in[j], in[j + 1]});

      NodeRef<double> points = tape.leaf(sample.base.to_tensor<double>());
      NodeRef<double> logits = net.forward_logits(tape, bound, points, Mode::kTrain);
      const std::vector<std::uint8_t> mask(8, 1);
      return softmax_cross_entropy(tape, logits, sample.labels, mask).loss;
    };

    for (double step : {1e-3, 1e-4, 1e-5}) {
      auto r = gradcheck(build, params, step);
      std::printf(
          "round %llu step %.0e: max rel %.3e at input %zu elem %lld (analytic %.6e numeric "
          "%.6e)\n",
          (unsigned long long)round, step, r.max_rel_err, r.worst_input,
          (long long)r.worst_element, r.analytic, r.numeric);
    }
  }
  return 0;
}
