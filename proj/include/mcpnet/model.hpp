#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mcpnet/autodiff.hpp"
#include "mcpnet/bytes.hpp"
#include "mcpnet/pointset.hpp"

namespace mcpnet {

// Uniform scaling of all channel widths, kept rational so configurations
// serialize exactly. 1/1 reproduces the reference architecture.
struct WidthFactor {
  std::uint32_t num = 1;
  std::uint32_t den = 1;

  Index scale(Index base) const {
    // round-half-up of base*num/den, clamped to >= 1
    const Index scaled = (2 * base * static_cast<Index>(num) + static_cast<Index>(den)) /
                         (2 * static_cast<Index>(den));
    return std::max<Index>(1, scaled);
  }

  double value() const { return double(num) / double(den); }
  bool operator==(const WidthFactor& o) const { return num == o.num && den == o.den; }
};

struct ColumnConfig {
  Index kernel_length = 1;
  std::array<Index, 3> channels{64, 128, 1024};
};

struct MCPNetConfig {
  std::vector<ColumnConfig> columns;            // K = columns.size()
  std::array<Index, 4> head_channels{1024, 512, 256, 128};
  Index num_classes = 0;                        // C, never scaled
  Index n_points = 512;                         // N used by the data pipeline
  WidthFactor width_factor;

  // K columns with kernel lengths 1, 3, 5, ... (first `k` of the canonical
  // ladder), matching the MCPNet-K naming.
  static MCPNetConfig make(int k, Index num_classes, Index n_points = 512,
                           WidthFactor wf = {1, 1}) {
    MCPNetConfig cfg;
    for (int i = 0; i < k; ++i) cfg.columns.push_back({2 * Index(i) + 1, {64, 128, 1024}});
    cfg.num_classes = num_classes;
    cfg.n_points = n_points;
    cfg.width_factor = wf;
    return cfg;
  }

  void validate() const {
    if (columns.empty()) throw InvalidConfig("need at least one column");
    if (num_classes < 2) throw InvalidConfig("need at least 2 classes");
    if (n_points < 1) throw InvalidConfig("need at least 1 point");
    if (width_factor.num < 1 || width_factor.den < 1)
      throw InvalidConfig("width factor must be positive");
    for (const ColumnConfig& col : columns) {
      if (col.kernel_length < 1 || col.kernel_length % 2 == 0)
        throw InvalidConfig("column kernel length must be odd, got " +
                            std::to_string(col.kernel_length));
      for (Index c : col.channels)
        if (c < 1) throw InvalidConfig("column channels must be >= 1");
    }
  }

  Index column_width(std::size_t col, int layer) const {
    return width_factor.scale(columns[col].channels[static_cast<std::size_t>(layer)]);
  }
  // Per-point feature width of one column: local layer-1 features concatenated
  // with the tiled global vector.
  Index column_output_width(std::size_t col) const {
    return column_width(col, 0) + column_width(col, 2);
  }
  Index head_width(int layer) const {
    return width_factor.scale(head_channels[static_cast<std::size_t>(layer)]);
  }
};

// Leaf handles for every trainable tensor of a model on one tape.
template <typename Scalar>
struct BoundModel {
  struct Conv {
    NodeRef<Scalar> w, b;
  };
  struct Norm {
    NodeRef<Scalar> gamma, beta;
  };
  std::vector<std::array<Conv, 3>> column_convs;
  std::vector<std::array<Norm, 3>> column_norms;
  std::vector<Conv> head_convs;  // 5 layers
  std::vector<Norm> head_norms;  // after layers 0..3
};

template <typename Scalar>
class MCPNet {
 public:
  // Fan-in uniform initialization: kernels ~ U(-b, b) with b = sqrt(1/(k*C_in)),
  // biases zero, batch-norm at identity, running stats at (0, 1).
  static MCPNet init(MCPNetConfig config, std::uint64_t seed) {
    config.validate();
    MCPNet net(std::move(config));
    Rng rng(seed);
    net.visit_trainable([&rng](Tensor<Scalar>& t, ParamKind kind) {
      if (kind != ParamKind::kConvWeight) return;  // everything else stays at its identity
      const Index fan_in = t.shape[0] * t.shape[1];
      const double bound = std::sqrt(1.0 / double(fan_in));
      for (Index i = 0; i < t.numel(); ++i)
        t.data[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    });
    return net;
  }

  const MCPNetConfig& config() const { return cfg_; }
  int num_columns() const { return static_cast<int>(cfg_.columns.size()); }

  BoundModel<Scalar> bind(Tape<Scalar>& tape, bool requires_grad) {
    BoundModel<Scalar> bound;
    for (Column& col : columns_) {
      std::array<typename BoundModel<Scalar>::Conv, 3> convs;
      std::array<typename BoundModel<Scalar>::Norm, 3> norms;
      for (int l = 0; l < 3; ++l) {
        convs[l] = {tape.leaf(col.conv[l].w, requires_grad), tape.leaf(col.conv[l].b, requires_grad)};
        norms[l] = {tape.leaf(col.norm[l].gamma, requires_grad),
                    tape.leaf(col.norm[l].beta, requires_grad)};
      }
      bound.column_convs.push_back(convs);
      bound.column_norms.push_back(norms);
    }
    for (int l = 0; l < 5; ++l)
      bound.head_convs.push_back(
          {tape.leaf(head_conv_[l].w, requires_grad), tape.leaf(head_conv_[l].b, requires_grad)});
    for (int l = 0; l < 4; ++l)
      bound.head_norms.push_back({tape.leaf(head_norm_[l].gamma, requires_grad),
                                  tape.leaf(head_norm_[l].beta, requires_grad)});
    return bound;
  }

  // One column: (conv -> BN -> ReLU) x3, then channel-wise max pooling into a
  // global vector that is tiled back over the points and concatenated with the
  // first layer's per-point features.
  NodeRef<Scalar> forward_column(Tape<Scalar>& tape, BoundModel<Scalar>& bound, int col,
                                 NodeRef<Scalar> points, Mode mode) {
    check_points(points);
    const Index n = points->value.shape[0];
    const auto ci = static_cast<std::size_t>(col);

    NodeRef<Scalar> x = points;
    NodeRef<Scalar> local = nullptr;
    for (int l = 0; l < 3; ++l) {
      x = conv1d(tape, x, bound.column_convs[ci][l].w, bound.column_convs[ci][l].b);
      x = batch_norm(tape, x, bound.column_norms[ci][l].gamma, bound.column_norms[ci][l].beta,
                     columns_[ci].norm[l].state, mode);
      x = relu(tape, x);
      expect_shape(x, {n, cfg_.column_width(ci, l)}, "column feature");
      if (l == 0) local = x;
    }
    NodeRef<Scalar> global = max_pool_seq(tape, x);
    expect_shape(global, {cfg_.column_width(ci, 2)}, "pooled global feature");
    NodeRef<Scalar> out = concat_cols(tape, {local, tile_rows(tape, global, n)});
    expect_shape(out, {n, cfg_.column_output_width(ci)}, "column output");
    return out;
  }

  // All columns concatenated, then five 1-wide convolutions; BN+ReLU after
  // each except the last, which produces the per-point class logits.
  NodeRef<Scalar> forward_logits(Tape<Scalar>& tape, BoundModel<Scalar>& bound,
                                 NodeRef<Scalar> points, Mode mode) {
    check_points(points);
    const Index n = points->value.shape[0];

    std::vector<NodeRef<Scalar>> features;
    Index total = 0;
    for (int col = 0; col < num_columns(); ++col) {
      features.push_back(forward_column(tape, bound, col, points, mode));
      total += cfg_.column_output_width(static_cast<std::size_t>(col));
    }
    NodeRef<Scalar> x = concat_cols(tape, features);
    expect_shape(x, {n, total}, "aggregated features");

    for (int l = 0; l < 4; ++l) {
      x = conv1d(tape, x, bound.head_convs[static_cast<std::size_t>(l)].w,
                 bound.head_convs[static_cast<std::size_t>(l)].b);
      x = batch_norm(tape, x, bound.head_norms[static_cast<std::size_t>(l)].gamma,
                     bound.head_norms[static_cast<std::size_t>(l)].beta, head_norm_[l].state,
                     mode);
      x = relu(tape, x);
      expect_shape(x, {n, cfg_.head_width(l)}, "head feature");
    }
    x = conv1d(tape, x, bound.head_convs[4].w, bound.head_convs[4].b);
    expect_shape(x, {n, cfg_.num_classes}, "logits");
    return x;
  }

  // Row-stochastic N x C score matrix. No gradients are recorded.
  RowMat<Scalar> score_matrix(const Tensor<Scalar>& points, Mode mode = Mode::kEval) {
    Tape<Scalar> tape;
    BoundModel<Scalar> bound = bind(tape, /*requires_grad=*/false);
    NodeRef<Scalar> logits = forward_logits(tape, bound, tape.leaf(points), mode);
    return softmax_rows<Scalar>(logits->value.mat());
  }

  // Per-point argmax labels; ties resolve to the lowest class index.
  std::vector<int> predict(const PointSet& pts) {
    const RowMat<Scalar> scores = score_matrix(pts.template to_tensor<Scalar>());
    std::vector<int> labels(static_cast<std::size_t>(scores.rows()));
    for (Index i = 0; i < scores.rows(); ++i) {
      int best = 0;
      for (Index c = 1; c < scores.cols(); ++c)
        if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
      labels[static_cast<std::size_t>(i)] = best;
    }
    return labels;
  }

  enum class ParamKind { kConvWeight, kConvBias, kNormGamma, kNormBeta };

  // Deterministic traversal of every trainable tensor; the optimizer and the
  // checkpoint writer both rely on this order.
  template <typename F>
  void visit_trainable(F&& f) {
    for (Column& col : columns_) {
      for (int l = 0; l < 3; ++l) {
        f(col.conv[l].w, ParamKind::kConvWeight);
        f(col.conv[l].b, ParamKind::kConvBias);
        f(col.norm[l].gamma, ParamKind::kNormGamma);
        f(col.norm[l].beta, ParamKind::kNormBeta);
      }
    }
    for (int l = 0; l < 4; ++l) {
      f(head_conv_[l].w, ParamKind::kConvWeight);
      f(head_conv_[l].b, ParamKind::kConvBias);
      f(head_norm_[l].gamma, ParamKind::kNormGamma);
      f(head_norm_[l].beta, ParamKind::kNormBeta);
    }
    f(head_conv_[4].w, ParamKind::kConvWeight);
    f(head_conv_[4].b, ParamKind::kConvBias);
  }

  // Gradients read off a bound tape, aligned with visit_trainable order.
  std::vector<Tensor<Scalar>> collect_gradients(const BoundModel<Scalar>& bound) const {
    std::vector<Tensor<Scalar>> grads;
    for (std::size_t ci = 0; ci < columns_.size(); ++ci) {
      for (int l = 0; l < 3; ++l) {
        grads.push_back(bound.column_convs[ci][l].w->grad);
        grads.push_back(bound.column_convs[ci][l].b->grad);
        grads.push_back(bound.column_norms[ci][l].gamma->grad);
        grads.push_back(bound.column_norms[ci][l].beta->grad);
      }
    }
    for (int l = 0; l < 4; ++l) {
      grads.push_back(bound.head_convs[static_cast<std::size_t>(l)].w->grad);
      grads.push_back(bound.head_convs[static_cast<std::size_t>(l)].b->grad);
      grads.push_back(bound.head_norms[static_cast<std::size_t>(l)].gamma->grad);
      grads.push_back(bound.head_norms[static_cast<std::size_t>(l)].beta->grad);
    }
    grads.push_back(bound.head_convs[4].w->grad);
    grads.push_back(bound.head_convs[4].b->grad);
    return grads;
  }

  std::size_t num_trainable_tensors() {
    std::size_t n = 0;
    visit_trainable([&n](Tensor<Scalar>&, ParamKind) { ++n; });
    return n;
  }

  // ---- checkpoint format (all integers little-endian u32, floats f32) ----
  //   "MCPN" | version=1
  //   K | per column: kernel_length, base c1, c2, c3
  //   head base h1..h4 | num_classes | n_points | wf_num | wf_den
  //   tensors in visit order (running mean/var follow each norm's beta):
  //     rank, extents..., data
  //   CRC32 of all preceding bytes

  std::vector<std::uint8_t> serialize() {
    ByteWriter w;
    w.put_magic(kMagic);
    w.put_u32(kVersion);
    w.put_u32(static_cast<std::uint32_t>(cfg_.columns.size()));
    for (const ColumnConfig& col : cfg_.columns) {
      w.put_u32(static_cast<std::uint32_t>(col.kernel_length));
      for (Index c : col.channels) w.put_u32(static_cast<std::uint32_t>(c));
    }
    for (Index h : cfg_.head_channels) w.put_u32(static_cast<std::uint32_t>(h));
    w.put_u32(static_cast<std::uint32_t>(cfg_.num_classes));
    w.put_u32(static_cast<std::uint32_t>(cfg_.n_points));
    w.put_u32(cfg_.width_factor.num);
    w.put_u32(cfg_.width_factor.den);

    visit_serialized([&w](Tensor<Scalar>& t) {
      w.put_u32(static_cast<std::uint32_t>(t.rank()));
      for (int d = 0; d < t.rank(); ++d) w.put_u32(static_cast<std::uint32_t>(t.shape[d]));
      for (Index i = 0; i < t.numel(); ++i) w.put_f32(static_cast<float>(t.data[i]));
    });

    w.put_crc32();
    return w.bytes();
  }

  void save(const std::filesystem::path& path) {
    ByteWriter w;
    const auto bytes = serialize();
    w.put_bytes(bytes.data(), bytes.size());
    w.write_file(path);
  }

  static MCPNet deserialize(std::vector<std::uint8_t> bytes) {
    ByteReader r(std::move(bytes));
    r.verify_crc32();
    r.expect_magic(kMagic);
    const std::uint32_t version = r.get_u32();
    if (version != kVersion)
      throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                            std::to_string(kVersion));

    MCPNetConfig cfg;
    const std::uint32_t k = r.get_u32();
    for (std::uint32_t i = 0; i < k; ++i) {
      ColumnConfig col;
      col.kernel_length = static_cast<Index>(r.get_u32());
      for (auto& c : col.channels) c = static_cast<Index>(r.get_u32());
      cfg.columns.push_back(col);
    }
    for (auto& h : cfg.head_channels) h = static_cast<Index>(r.get_u32());
    cfg.num_classes = static_cast<Index>(r.get_u32());
    cfg.n_points = static_cast<Index>(r.get_u32());
    cfg.width_factor.num = r.get_u32();
    cfg.width_factor.den = r.get_u32();
    cfg.validate();

    MCPNet net(std::move(cfg));
    net.visit_serialized([&r](Tensor<Scalar>& t) {
      const auto rank = static_cast<int>(r.get_u32());
      if (rank != t.rank()) throw ChecksumMismatch("checkpoint tensor rank mismatch");
      for (int d = 0; d < rank; ++d)
        if (static_cast<Index>(r.get_u32()) != t.shape[d])
          throw ChecksumMismatch("checkpoint tensor shape mismatch");
      for (Index i = 0; i < t.numel(); ++i) t.data[i] = static_cast<Scalar>(r.get_f32());
    });
    if (r.remaining() != 4) throw ChecksumMismatch("trailing bytes in checkpoint");
    return net;
  }

  static MCPNet load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(std::move(bytes));
  }

  // Batch-norm running statistics, exposed for tests.
  BatchNormState<Scalar>& column_norm_state(int col, int layer) {
    return columns_[static_cast<std::size_t>(col)].norm[layer].state;
  }
  BatchNormState<Scalar>& head_norm_state(int layer) { return head_norm_[layer].state; }

 private:
  struct ConvParams {
    Tensor<Scalar> w;  // k x C_in x C_out
    Tensor<Scalar> b;  // C_out
  };
  struct NormParams {
    Tensor<Scalar> gamma;
    Tensor<Scalar> beta;
    BatchNormState<Scalar> state;

    explicit NormParams(Index channels)
        : gamma(Tensor<Scalar>::constant(Shape{channels}, Scalar(1))),
          beta(Tensor<Scalar>(Shape{channels})),
          state(channels) {}
  };
  struct Column {
    std::vector<ConvParams> conv;
    std::vector<NormParams> norm;
  };

  explicit MCPNet(MCPNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (std::size_t ci = 0; ci < cfg_.columns.size(); ++ci) {
      Column col;
      Index in_ch = 2;  // (x, y)
      for (int l = 0; l < 3; ++l) {
        const Index out_ch = cfg_.column_width(ci, l);
        col.conv.push_back({Tensor<Scalar>(Shape{cfg_.columns[ci].kernel_length, in_ch, out_ch}),
                            Tensor<Scalar>(Shape{out_ch})});
        col.norm.emplace_back(out_ch);
        in_ch = out_ch;
      }
      columns_.push_back(std::move(col));
    }

    Index in_ch = 0;
    for (std::size_t ci = 0; ci < cfg_.columns.size(); ++ci)
      in_ch += cfg_.column_output_width(ci);
    for (int l = 0; l < 5; ++l) {
      const Index out_ch = l < 4 ? cfg_.head_width(l) : cfg_.num_classes;
      head_conv_.push_back(
          {Tensor<Scalar>(Shape{1, in_ch, out_ch}), Tensor<Scalar>(Shape{out_ch})});
      if (l < 4) head_norm_.emplace_back(out_ch);
      in_ch = out_ch;
    }
  }

  void check_points(NodeRef<Scalar> points) const {
    if (points->value.rank() != 2 || points->value.shape[1] != 2)
      throw ShapeMismatch("model input must be N x 2, got " + points->value.shape.str());
  }

  static void expect_shape(NodeRef<Scalar> node, Shape expected, const char* what) {
    if (node->value.shape != expected)
      throw ShapeMismatch(std::string(what) + ": expected " + expected.str() + ", got " +
                          node->value.shape.str());
  }

  // Serialization order: every trainable tensor in visit order, with each
  // norm's running mean/var right after its beta.
  template <typename F>
  void visit_serialized(F&& f) {
    auto emit_norm_state = [&f](NormParams& norm) {
      Tensor<Scalar> mean = Tensor<Scalar>::from_vector(norm.state.running_mean);
      Tensor<Scalar> var = Tensor<Scalar>::from_vector(norm.state.running_var);
      f(mean);
      f(var);
      norm.state.running_mean = mean.vec();
      norm.state.running_var = var.vec();
    };
    for (Column& col : columns_) {
      for (int l = 0; l < 3; ++l) {
        f(col.conv[l].w);
        f(col.conv[l].b);
        f(col.norm[l].gamma);
        f(col.norm[l].beta);
        emit_norm_state(col.norm[l]);
      }
    }
    for (int l = 0; l < 4; ++l) {
      f(head_conv_[l].w);
      f(head_conv_[l].b);
      f(head_norm_[l].gamma);
      f(head_norm_[l].beta);
      emit_norm_state(head_norm_[l]);
    }
    f(head_conv_[4].w);
    f(head_conv_[4].b);
  }

  static constexpr char kMagic[4] = {'M', 'C', 'P', 'N'};
  static constexpr std::uint32_t kVersion = 1;

  MCPNetConfig cfg_;
  std::vector<Column> columns_;
  std::vector<ConvParams> head_conv_;
  std::vector<NormParams> head_norm_;
};

}  // namespace mcpnet
