#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "mcpnet/tensor.hpp"

namespace mcpnet {

enum class Mode { kTrain, kEval };

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // same shape as value, zero until backward
  bool requires_grad = false;
};

template <typename Scalar>
using NodeRef = Node<Scalar>*;

// Records executed operations so gradients can be replayed in exact reverse
// execution order. Nodes are owned by the tape; one tape per forward pass.
// When no input of an op needs gradients, nothing is recorded and the tape
// degenerates to plain eager evaluation.
template <typename Scalar>
class Tape {
 public:
  NodeRef<Scalar> leaf(Tensor<Scalar> value, bool requires_grad = false) {
    Node<Scalar>& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.grad = Tensor<Scalar>(n.value.shape);
    n.requires_grad = requires_grad;
    return &n;
  }

  // The closure reads its op's output grad and accumulates into input grads.
  void record(std::function<void()> backward) { steps_.push_back(std::move(backward)); }

  void backward(NodeRef<Scalar> loss) {
    if (loss->value.numel() != 1)
      throw ShapeMismatch("backward requires a scalar loss, got " + loss->value.shape.str());
    loss->grad.data[0] = Scalar(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  std::size_t recorded_steps() const { return steps_.size(); }

 private:
  std::deque<Node<Scalar>> nodes_;
  std::vector<std::function<void()>> steps_;
};

namespace detail {

inline void require_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeMismatch(msg);
}

}  // namespace detail

// "Same" 1-D convolution over the row (point) axis with zero padding:
//   out[n,o] = bias[o] + sum_{j,i} input[n+j-(k-1)/2, i] * kernel[j,i,o].
// input: N x C_in, kernel: k x C_in x C_out, bias: C_out.
template <typename Scalar>
NodeRef<Scalar> conv1d(Tape<Scalar>& tape, NodeRef<Scalar> input, NodeRef<Scalar> kernel,
                       NodeRef<Scalar> bias) {
  detail::require_shape(input->value.rank() == 2, "conv1d: input must be rank 2");
  detail::require_shape(kernel->value.rank() == 3, "conv1d: kernel must be rank 3");
  detail::require_shape(bias->value.rank() == 1, "conv1d: bias must be rank 1");
  const Index n = input->value.shape[0];
  const Index k = kernel->value.shape[0];
  const Index c_out = kernel->value.shape[2];
  if (k % 2 == 0) throw EvenKernel("conv1d: kernel length must be odd, got " + std::to_string(k));
  detail::require_shape(kernel->value.shape[1] == input->value.shape[1],
                        "conv1d: kernel " + kernel->value.shape.str() + " does not match input " +
                            input->value.shape.str());
  detail::require_shape(bias->value.shape[0] == c_out,
                        "conv1d: bias does not match kernel output channels");

  const Index half = (k - 1) / 2;
  Tensor<Scalar> value(Shape{n, c_out});
  value.mat().rowwise() = bias->value.vec().transpose();
  for (Index j = 0; j < k; ++j) {
    const Index shift = j - half;  // output row n reads input row n + shift
    const Index n0 = std::max<Index>(0, -shift);
    const Index len = n - std::abs(shift);
    if (len <= 0) continue;
    value.mat().middleRows(n0, len).noalias() +=
        input->value.mat().middleRows(n0 + shift, len) * kernel->value.slice(j);
  }

  const bool rg = input->requires_grad || kernel->requires_grad || bias->requires_grad;
  NodeRef<Scalar> out = tape.leaf(std::move(value), rg);
  if (rg) {
    tape.record([input, kernel, bias, out, n, k, half]() {
      auto gout = out->grad.mat();
      if (bias->requires_grad) bias->grad.vec() += gout.colwise().sum().transpose();
      for (Index j = 0; j < k; ++j) {
        const Index shift = j - half;
        const Index n0 = std::max<Index>(0, -shift);
        const Index len = n - std::abs(shift);
        if (len <= 0) continue;
        if (input->requires_grad)
          input->grad.mat().middleRows(n0 + shift, len).noalias() +=
              gout.middleRows(n0, len) * kernel->value.slice(j).transpose();
        if (kernel->requires_grad)
          kernel->grad.slice(j).noalias() +=
              input->value.mat().middleRows(n0 + shift, len).transpose() * gout.middleRows(n0, len);
      }
    });
  }
  return out;
}

// Per-channel batch normalization state carried across forward passes.
template <typename Scalar>
struct BatchNormState {
  ColVec<Scalar> running_mean;
  ColVec<Scalar> running_var;

  explicit BatchNormState(Index channels)
      : running_mean(ColVec<Scalar>::Zero(channels)),
        running_var(ColVec<Scalar>::Ones(channels)) {}
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// Train mode normalizes each channel by the statistics of the rows currently
// in the tensor (the batch x point axis) and updates the running estimates;
// eval mode normalizes by the running estimates only.
template <typename Scalar>
NodeRef<Scalar> batch_norm(Tape<Scalar>& tape, NodeRef<Scalar> input, NodeRef<Scalar> gamma,
                           NodeRef<Scalar> beta, BatchNormState<Scalar>& state, Mode mode) {
  detail::require_shape(input->value.rank() == 2, "batch_norm: input must be rank 2");
  const Index n = input->value.shape[0];
  const Index c = input->value.shape[1];
  detail::require_shape(gamma->value.rank() == 1 && gamma->value.shape[0] == c,
                        "batch_norm: gamma does not match input channels");
  detail::require_shape(beta->value.rank() == 1 && beta->value.shape[0] == c,
                        "batch_norm: beta does not match input channels");
  detail::require_shape(state.running_mean.size() == c, "batch_norm: state does not match channels");

  const Scalar eps = Scalar(kBatchNormEpsilon);
  auto x = input->value.mat();

  ColVec<Scalar> mean(c), var(c);
  if (mode == Mode::kTrain) {
    mean = x.colwise().mean().transpose();
    var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    const Scalar m = Scalar(kBatchNormMomentum);
    state.running_mean = m * state.running_mean + (Scalar(1) - m) * mean;
    state.running_var = m * state.running_var + (Scalar(1) - m) * var;
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  ColVec<Scalar> inv_std = (var.array() + eps).rsqrt();

  RowMat<Scalar> xhat =
      (x.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array();
  Tensor<Scalar> value(Shape{n, c});
  value.mat() = (xhat.array().rowwise() * gamma->value.vec().transpose().array()).rowwise() +
                beta->value.vec().transpose().array();

  const bool rg = input->requires_grad || gamma->requires_grad || beta->requires_grad;
  NodeRef<Scalar> out = tape.leaf(std::move(value), rg);
  if (rg) {
    tape.record([input, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std),
                 mode]() {
      auto gout = out->grad.mat();
      if (gamma->requires_grad)
        gamma->grad.vec() += (gout.array() * xhat.array()).colwise().sum().matrix().transpose();
      if (beta->requires_grad) beta->grad.vec() += gout.colwise().sum().transpose();
      if (!input->requires_grad) return;
      // d xhat
      RowMat<Scalar> gxhat =
          gout.array().rowwise() * gamma->value.vec().transpose().array();
      if (mode == Mode::kEval) {
        input->grad.mat().array() += gxhat.array().rowwise() * inv_std.transpose().array();
        return;
      }
      // Batch statistics depend on the input, so fold their gradients in:
      // dx = inv_std * (gxhat - mean(gxhat) - xhat * mean(gxhat .* xhat)).
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean_g = gxhat.colwise().mean();
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean_gx =
          (gxhat.array() * xhat.array()).colwise().mean();
      RowMat<Scalar> dx =
          ((gxhat.rowwise() - mean_g).array() - xhat.array().rowwise() * mean_gx.array())
              .rowwise() *
          inv_std.transpose().array();
      input->grad.mat() += dx;
    });
  }
  return out;
}

// Elementwise max(0, x); the subgradient at exactly zero is zero.
template <typename Scalar>
NodeRef<Scalar> relu(Tape<Scalar>& tape, NodeRef<Scalar> input) {
  Tensor<Scalar> value(input->value.shape);
  value.data = input->value.data.max(Scalar(0));
  NodeRef<Scalar> out = tape.leaf(std::move(value), input->requires_grad);
  if (input->requires_grad) {
    tape.record([input, out]() {
      input->grad.data += out->grad.data * (input->value.data > Scalar(0)).template cast<Scalar>();
    });
  }
  return out;
}

// Channel-wise maximum over the row axis: N x C -> C. The gradient is routed
// to the first-occurring argmax row of each channel.
template <typename Scalar>
NodeRef<Scalar> max_pool_seq(Tape<Scalar>& tape, NodeRef<Scalar> input) {
  detail::require_shape(input->value.rank() == 2, "max_pool_seq: input must be rank 2");
  const Index n = input->value.shape[0];
  const Index c = input->value.shape[1];
  detail::require_shape(n >= 1, "max_pool_seq: empty input");

  Tensor<Scalar> value(Shape{c});
  std::vector<Index> argmax(static_cast<std::size_t>(c));
  auto x = input->value.mat();
  for (Index j = 0; j < c; ++j) {
    Index best = 0;
    for (Index i = 1; i < n; ++i)
      if (x(i, j) > x(best, j)) best = i;
    argmax[static_cast<std::size_t>(j)] = best;
    value.vec()(j) = x(best, j);
  }
  NodeRef<Scalar> out = tape.leaf(std::move(value), input->requires_grad);
  if (input->requires_grad) {
    tape.record([input, out, argmax = std::move(argmax), c]() {
      for (Index j = 0; j < c; ++j)
        input->grad.mat()(argmax[static_cast<std::size_t>(j)], j) += out->grad.vec()(j);
    });
  }
  return out;
}

// Duplicates a C-vector into n identical rows; the backward pass sums the
// incoming row gradients.
template <typename Scalar>
NodeRef<Scalar> tile_rows(Tape<Scalar>& tape, NodeRef<Scalar> input, Index n) {
  detail::require_shape(input->value.rank() == 1, "tile_rows: input must be rank 1");
  detail::require_shape(n >= 1, "tile_rows: row count must be >= 1");
  const Index c = input->value.shape[0];
  Tensor<Scalar> value(Shape{n, c});
  value.mat().rowwise() = input->value.vec().transpose();
  NodeRef<Scalar> out = tape.leaf(std::move(value), input->requires_grad);
  if (input->requires_grad) {
    tape.record([input, out]() { input->grad.vec() += out->grad.mat().colwise().sum().transpose(); });
  }
  return out;
}

// Column-wise concatenation of N x C_i tensors in argument order.
template <typename Scalar>
NodeRef<Scalar> concat_cols(Tape<Scalar>& tape, const std::vector<NodeRef<Scalar>>& inputs) {
  detail::require_shape(!inputs.empty(), "concat_cols: no inputs");
  const Index n = inputs.front()->value.shape[0];
  Index total = 0;
  bool rg = false;
  for (NodeRef<Scalar> in : inputs) {
    detail::require_shape(in->value.rank() == 2, "concat_cols: inputs must be rank 2");
    detail::require_shape(in->value.shape[0] == n, "concat_cols: inputs must share the row count");
    total += in->value.shape[1];
    rg = rg || in->requires_grad;
  }
  Tensor<Scalar> value(Shape{n, total});
  Index col = 0;
  for (NodeRef<Scalar> in : inputs) {
    value.mat().middleCols(col, in->value.shape[1]) = in->value.mat();
    col += in->value.shape[1];
  }
  NodeRef<Scalar> out = tape.leaf(std::move(value), rg);
  if (rg) {
    tape.record([inputs, out]() {
      Index col = 0;
      for (NodeRef<Scalar> in : inputs) {
        const Index w = in->value.shape[1];
        if (in->requires_grad) in->grad.mat() += out->grad.mat().middleCols(col, w);
        col += w;
      }
    });
  }
  return out;
}

// Elementwise sum of two same-shape tensors.
template <typename Scalar>
NodeRef<Scalar> add(Tape<Scalar>& tape, NodeRef<Scalar> a, NodeRef<Scalar> b) {
  detail::require_shape(a->value.shape == b->value.shape,
                        "add: shapes " + a->value.shape.str() + " vs " + b->value.shape.str());
  Tensor<Scalar> value(a->value.shape);
  value.data = a->value.data + b->value.data;
  const bool rg = a->requires_grad || b->requires_grad;
  NodeRef<Scalar> out = tape.leaf(std::move(value), rg);
  if (rg) {
    tape.record([a, b, out]() {
      if (a->requires_grad) a->grad.data += out->grad.data;
      if (b->requires_grad) b->grad.data += out->grad.data;
    });
  }
  return out;
}

// Scalar projection sum_i w_i * x_i over the flattened input. Linear, so it
// is exact under finite differences; the gradient check harness uses it to
// reduce non-scalar op outputs.
template <typename Scalar>
NodeRef<Scalar> weighted_sum(Tape<Scalar>& tape, NodeRef<Scalar> input,
                             Tensor<Scalar> weights) {
  detail::require_shape(weights.numel() == input->value.numel(),
                        "weighted_sum: weights do not match input size");
  Tensor<Scalar> value = Tensor<Scalar>::scalar((input->value.data * weights.data).sum());
  NodeRef<Scalar> out = tape.leaf(std::move(value), input->requires_grad);
  if (input->requires_grad) {
    tape.record([input, out, weights = std::move(weights)]() {
      input->grad.data += out->grad.data[0] * weights.data;
    });
  }
  return out;
}

// Row-wise softmax of a plain matrix (numerically stable). Used wherever
// scores are needed without a loss.
template <typename Scalar>
RowMat<Scalar> softmax_rows(const RowMat<Scalar>& logits) {
  RowMat<Scalar> s(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    s.row(i) = (logits.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

template <typename Scalar>
struct SoftmaxLoss {
  NodeRef<Scalar> loss;     // scalar: summed NLL over mask=1 rows
  RowMat<Scalar> scores;    // row-stochastic softmax of the logits
};

// Row-wise softmax followed by summed negative log-likelihood over the rows
// whose mask entry is 1. Gradient per masked row is (softmax - onehot).
template <typename Scalar>
SoftmaxLoss<Scalar> softmax_cross_entropy(Tape<Scalar>& tape, NodeRef<Scalar> logits,
                                          const std::vector<int>& labels,
                                          const std::vector<std::uint8_t>& mask) {
  detail::require_shape(logits->value.rank() == 2, "softmax_cross_entropy: logits must be rank 2");
  const Index n = logits->value.shape[0];
  const Index c = logits->value.shape[1];
  detail::require_shape(static_cast<Index>(labels.size()) == n,
                        "softmax_cross_entropy: labels length does not match rows");
  detail::require_shape(static_cast<Index>(mask.size()) == n,
                        "softmax_cross_entropy: mask length does not match rows");
  for (int label : labels)
    if (label < 0 || label >= c)
      throw LabelOutOfRange("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(c) + ")");

  auto x = logits->value.mat();
  RowMat<Scalar> scores(n, c);
  Scalar total = Scalar(0);
  for (Index i = 0; i < n; ++i) {
    const Scalar m = x.row(i).maxCoeff();
    scores.row(i) = (x.row(i).array() - m).exp();
    const Scalar z = scores.row(i).sum();
    scores.row(i) /= z;
    if (mask[static_cast<std::size_t>(i)])
      total += std::log(z) + m - x(i, labels[static_cast<std::size_t>(i)]);
  }

  NodeRef<Scalar> out = tape.leaf(Tensor<Scalar>::scalar(total), logits->requires_grad);
  if (logits->requires_grad) {
    tape.record([logits, out, scores, labels, mask, n]() {
      const Scalar g = out->grad.data[0];
      for (Index i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        logits->grad.mat().row(i) += g * scores.row(i);
        logits->grad.mat()(i, labels[static_cast<std::size_t>(i)]) -= g;
      }
    });
  }
  return {out, std::move(scores)};
}

}  // namespace mcpnet
