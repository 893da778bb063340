#pragma once

#include <vector>

#include "mcpnet/tensor.hpp"

namespace mcpnet {

// Ordered 2D points sampled from a sketch, normalized to [0,1]. The first
// n_original rows are real scan-order samples; any remaining rows are cyclic
// repetitions added to reach the configured length.
struct PointSet {
  RowMat<float> points;  // N x 2, columns (x, y)
  Index n_original = 0;

  Index size() const { return points.rows(); }

  template <typename Scalar>
  Tensor<Scalar> to_tensor() const {
    Tensor<Scalar> t(Shape{points.rows(), 2});
    t.mat() = points.cast<Scalar>();
    return t;
  }
};

struct LabeledPointSet {
  PointSet base;
  std::vector<int> labels;  // one component id per point, padded rows included
};

}  // namespace mcpnet
