#pragma once

#include <Eigen/Dense>
#include <array>
#include <initializer_list>
#include <sstream>
#include <string>

#include "mcpnet/common.hpp"

namespace mcpnet {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using FlatArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Extents of a dense array of rank 1..3.
struct Shape {
  std::array<Index, 3> dim{1, 1, 1};
  int rank = 0;

  Shape() = default;
  Shape(std::initializer_list<Index> dims) {
    rank = static_cast<int>(dims.size());
    if (rank < 1 || rank > 3) throw ShapeMismatch("tensor rank must be 1..3");
    int i = 0;
    for (Index d : dims) dim[i++] = d;
  }

  Index operator[](int i) const { return dim[static_cast<std::size_t>(i)]; }

  Index numel() const {
    Index n = 1;
    for (int i = 0; i < rank; ++i) n *= dim[static_cast<std::size_t>(i)];
    return n;
  }

  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i) {
      if (dim[static_cast<std::size_t>(i)] != o.dim[static_cast<std::size_t>(i)]) return false;
    }
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < rank; ++i) os << (i ? "x" : "") << dim[static_cast<std::size_t>(i)];
    os << ']';
    return os.str();
  }
};

// Dense real tensor of rank <= 3, stored flat in row-major order. Rank-2
// tensors are viewed as Eigen matrices, rank-3 tensors as a stack of
// matrix slices along the leading index.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(FlatArray<Scalar>::Zero(s.numel())) {}
  Tensor(Shape s, FlatArray<Scalar> d) : shape(s), data(std::move(d)) {
    if (data.size() != shape.numel())
      throw ShapeMismatch("tensor data length does not match shape " + shape.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }

  static Tensor constant(Shape s, Scalar v) {
    Tensor t(s);
    t.data.setConstant(v);
    return t;
  }

  static Tensor scalar(Scalar v) { return constant(Shape{1}, v); }

  static Tensor from_matrix(const RowMat<Scalar>& m) {
    Tensor t(Shape{m.rows(), m.cols()});
    t.mat() = m;
    return t;
  }

  static Tensor from_vector(const ColVec<Scalar>& v) {
    Tensor t(Shape{v.size()});
    t.vec() = v;
    return t;
  }

  Index numel() const { return data.size(); }
  int rank() const { return shape.rank; }

  Scalar value() const {
    if (numel() != 1) throw ShapeMismatch("value() requires a scalar tensor, got " + shape.str());
    return data[0];
  }

  // Rank-1 view.
  Eigen::Map<ColVec<Scalar>> vec() {
    require_rank(1);
    return {data.data(), shape[0]};
  }
  Eigen::Map<const ColVec<Scalar>> vec() const {
    require_rank(1);
    return {data.data(), shape[0]};
  }

  // Rank-2 view.
  Eigen::Map<RowMat<Scalar>> mat() {
    require_rank(2);
    return {data.data(), shape[0], shape[1]};
  }
  Eigen::Map<const RowMat<Scalar>> mat() const {
    require_rank(2);
    return {data.data(), shape[0], shape[1]};
  }

  // Rank-3 view: slice j is the shape[1] x shape[2] matrix at leading index j.
  Eigen::Map<RowMat<Scalar>> slice(Index j) {
    require_rank(3);
    return {data.data() + j * shape[1] * shape[2], shape[1], shape[2]};
  }
  Eigen::Map<const RowMat<Scalar>> slice(Index j) const {
    require_rank(3);
    return {data.data() + j * shape[1] * shape[2], shape[1], shape[2]};
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t;
    t.shape = shape;
    t.data = data.template cast<Other>();
    return t;
  }

  Shape shape;
  FlatArray<Scalar> data;

 private:
  void require_rank(int r) const {
    if (shape.rank != r)
      throw ShapeMismatch("expected rank-" + std::to_string(r) + " tensor, got " + shape.str());
  }
};

}  // namespace mcpnet
