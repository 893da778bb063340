#pragma once

#include <string>
#include <vector>

#include "mcpnet/gradcheck.hpp"
#include "mcpnet/model.hpp"
#include "mcpnet/train.hpp"

namespace mcpnet {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// Finite-difference verification of every differentiable op plus the full
// single-column network loss at desk scale, repeated over `rounds` seeds.
// 64-bit throughout.
inline std::vector<CheckResult> run_gradcheck_suite(std::uint64_t base_seed, int rounds = 5) {
  std::vector<CheckResult> results;

  auto random_tensor = [](Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(s);
    for (Index i = 0; i < t.numel(); ++i) t.data[i] = rng.uniform(lo, hi);
    return t;
  };

  auto run = [&](const std::string& name, auto&& fn) {
    double worst = 0.0;
    for (int round = 0; round < rounds; ++round) {
      Rng rng(mix_seed(base_seed, static_cast<std::uint64_t>(round) * 1000 + results.size()));
      worst = std::max(worst, fn(rng));
    }
    results.push_back({name, worst, worst < kGradCheckTolerance});
  };

  run("conv1d", [&](Rng& rng) {
    Tensor<double> x = random_tensor(Shape{6, 2}, rng);
    Tensor<double> w = random_tensor(Shape{3, 2, 4}, rng);
    Tensor<double> b = random_tensor(Shape{4}, rng);
    Tensor<double> proj = random_tensor(Shape{6, 4}, rng);
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 return weighted_sum(tape, conv1d(tape, in[0], in[1], in[2]), proj);
               },
               {x, w, b})
        .max_rel_err;
  });

  run("batch_norm_train", [&](Rng& rng) {
    Tensor<double> x = random_tensor(Shape{5, 3}, rng);
    Tensor<double> gamma = random_tensor(Shape{3}, rng, 0.5, 1.5);
    Tensor<double> beta = random_tensor(Shape{3}, rng);
    Tensor<double> proj = random_tensor(Shape{5, 3}, rng);
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 BatchNormState<double> state(3);
                 return weighted_sum(
                     tape, batch_norm(tape, in[0], in[1], in[2], state, Mode::kTrain), proj);
               },
               {x, gamma, beta})
        .max_rel_err;
  });

  run("relu", [&](Rng& rng) {
    Tensor<double> x(Shape{6, 3});
    for (Index i = 0; i < x.numel(); ++i) {
      const double mag = rng.uniform(0.15, 1.0);
      x.data[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    Tensor<double> proj = random_tensor(Shape{6, 3}, rng);
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 return weighted_sum(tape, relu(tape, in[0]), proj);
               },
               {x})
        .max_rel_err;
  });

  run("max_pool_seq", [&](Rng& rng) {
    Tensor<double> x = random_tensor(Shape{7, 3}, rng);
    Tensor<double> proj = random_tensor(Shape{3}, rng);
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 return weighted_sum(tape, max_pool_seq(tape, in[0]), proj);
               },
               {x})
        .max_rel_err;
  });

  run("tile_rows", [&](Rng& rng) {
    Tensor<double> x = random_tensor(Shape{4}, rng);
    Tensor<double> proj = random_tensor(Shape{5, 4}, rng);
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 return weighted_sum(tape, tile_rows(tape, in[0], 5), proj);
               },
               {x})
        .max_rel_err;
  });

  run("concat_cols", [&](Rng& rng) {
    Tensor<double> a = random_tensor(Shape{4, 2}, rng);
    Tensor<double> b = random_tensor(Shape{4, 3}, rng);
    Tensor<double> proj = random_tensor(Shape{4, 5}, rng);
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 return weighted_sum(tape, concat_cols(tape, {in[0], in[1]}), proj);
               },
               {a, b})
        .max_rel_err;
  });

  run("softmax_cross_entropy", [&](Rng& rng) {
    Tensor<double> logits = random_tensor(Shape{6, 3}, rng, -2.0, 2.0);
    std::vector<int> labels(6);
    for (auto& l : labels) l = static_cast<int>(rng.index(3));
    std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};
    return gradcheck(
               [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
                 return softmax_cross_entropy(tape, in[0], labels, mask).loss;
               },
               {logits})
        .max_rel_err;
  });

  // Full single-column network, desk scale: width 1/16, N=8, C=3. Gradients
  // of the batch loss with respect to every trainable parameter.
  run("mcpnet1_loss", [&](Rng& rng) {
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
    net.visit_trainable([&params](Tensor<double>& t, typename MCPNet<double>::ParamKind) {
      params.push_back(t);
    });

    auto build = [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
      BoundModel<double> bound;
      std::size_t j = 0;
      // Bind the harness leaves in visit order so gradients land on `in`.
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

    return gradcheck(build, params).max_rel_err;
  });

  return results;
}

}  // namespace mcpnet
