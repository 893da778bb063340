#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mcpnet/autodiff.hpp"
#include "mcpnet/gradcheck.hpp"

using namespace mcpnet;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (Index i = 0; i < t.numel(); ++i) t.data[i] = rng.uniform(lo, hi);
  return t;
}

// Independent reference convolution: four explicit loops, no shared code with
// the Eigen implementation.
RowMat<double> conv1d_reference(const Tensor<double>& input, const Tensor<double>& kernel,
                                const Tensor<double>& bias) {
  const Index n = input.shape[0], c_in = input.shape[1];
  const Index k = kernel.shape[0], c_out = kernel.shape[2];
  const Index half = (k - 1) / 2;
  RowMat<double> out(n, c_out);
  for (Index row = 0; row < n; ++row) {
    for (Index o = 0; o < c_out; ++o) {
      double acc = bias.vec()(o);
      for (Index j = 0; j < k; ++j) {
        const Index src = row + j - half;
        if (src < 0 || src >= n) continue;
        for (Index i = 0; i < c_in; ++i) {
          acc += input.mat()(src, i) * kernel.data[(j * c_in + i) * c_out + o];
        }
      }
      out(row, o) = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("conv1d identity kernel reproduces the input") {
  Rng rng(1);
  Tensor<double> x = random_tensor(Shape{7, 3}, rng);
  Tensor<double> w(Shape{1, 3, 3});
  for (Index i = 0; i < 3; ++i) w.slice(0)(i, i) = 1.0;
  Tensor<double> b(Shape{3});

  Tape<double> tape;
  auto y = conv1d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
  CHECK((y->value.mat() - x.mat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv1d zero padding at the boundary") {
  Tensor<double> x = Tensor<double>::constant(Shape{5, 1}, 1.0);
  Tensor<double> w = Tensor<double>::constant(Shape{3, 1, 1}, 1.0);
  Tensor<double> b(Shape{1});

  Tape<double> tape;
  auto y = conv1d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
  const std::vector<double> expected{2, 3, 3, 3, 2};
  for (Index i = 0; i < 5; ++i) CHECK(y->value.mat()(i, 0) == doctest::Approx(expected[i]));
}

TEST_CASE("conv1d matches the quadruple-loop reference") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Tensor<double> x = random_tensor(Shape{6, 2}, rng);
    Tensor<double> w = random_tensor(Shape{5, 2, 4}, rng);
    Tensor<double> b = random_tensor(Shape{4}, rng);

    Tape<double> tape;
    auto y = conv1d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
    RowMat<double> ref = conv1d_reference(x, w, b);
    CHECK((y->value.mat() - ref).cwiseAbs().maxCoeff() < 1e-6);

    // 32-bit path against the same oracle.
    Tape<float> ftape;
    auto fy = conv1d(ftape, ftape.leaf(x.cast<float>()), ftape.leaf(w.cast<float>()),
                     ftape.leaf(b.cast<float>()));
    CHECK((fy->value.mat().cast<double>() - ref).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("conv1d is linear in the input") {
  Rng rng(11);
  Tensor<double> x = random_tensor(Shape{8, 2}, rng);
  Tensor<double> x2 = x;
  x2.data *= 2.0;
  Tensor<double> w = random_tensor(Shape{3, 2, 3}, rng);
  Tensor<double> b(Shape{3});

  Tape<double> tape;
  auto y = conv1d(tape, tape.leaf(x), tape.leaf(w), tape.leaf(b));
  auto y2 = conv1d(tape, tape.leaf(x2), tape.leaf(w), tape.leaf(b));
  CHECK((y2->value.data - 2.0 * y->value.data).abs().maxCoeff() == 0.0);
}

TEST_CASE("conv1d rejects bad shapes") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>(Shape{4, 2}));
  CHECK_THROWS_AS(conv1d(tape, x, tape.leaf(Tensor<double>(Shape{2, 2, 3})),
                         tape.leaf(Tensor<double>(Shape{3}))),
                  EvenKernel);
  CHECK_THROWS_AS(conv1d(tape, x, tape.leaf(Tensor<double>(Shape{3, 5, 3})),
                         tape.leaf(Tensor<double>(Shape{3}))),
                  ShapeMismatch);
  CHECK_THROWS_AS(conv1d(tape, x, tape.leaf(Tensor<double>(Shape{3, 2, 3})),
                         tape.leaf(Tensor<double>(Shape{4}))),
                  ShapeMismatch);
}

TEST_CASE("conv1d gradcheck over 5 seeds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(seed, 7));
    Tensor<double> x = random_tensor(Shape{6, 2}, rng);
    Tensor<double> w = random_tensor(Shape{3, 2, 4}, rng);
    Tensor<double> b = random_tensor(Shape{4}, rng);
    Tensor<double> proj = random_tensor(Shape{6, 4}, rng);

    auto report = gradcheck(
        [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
          return weighted_sum(tape, conv1d(tape, in[0], in[1], in[2]), proj);
        },
        {x, w, b});
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("batch_norm leaves normalized input nearly unchanged") {
  // Two channels with mean 0, variance 1 (computed with the biased estimator).
  Tensor<double> x(Shape{4, 2});
  x.mat() << 1, -1, -1, 1, 1, -1, -1, 1;
  Tensor<double> gamma = Tensor<double>::constant(Shape{2}, 1.0);
  Tensor<double> beta(Shape{2});
  BatchNormState<double> state(2);

  Tape<double> tape;
  auto y = batch_norm(tape, tape.leaf(x), tape.leaf(gamma), tape.leaf(beta), state, Mode::kTrain);
  CHECK((y->value.mat() - x.mat()).cwiseAbs().maxCoeff() < 1e-4);  // epsilon shrinks slightly
}

TEST_CASE("batch_norm maps constant channels to beta") {
  Tensor<double> x = Tensor<double>::constant(Shape{6, 3}, 4.2);
  Tensor<double> gamma = Tensor<double>::constant(Shape{3}, 1.5);
  Tensor<double> beta(Shape{3});
  beta.vec() << -1, 0, 2;
  BatchNormState<double> state(3);

  Tape<double> tape;
  auto y = batch_norm(tape, tape.leaf(x), tape.leaf(gamma), tape.leaf(beta), state, Mode::kTrain);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(y->value.mat()(i, j) == doctest::Approx(beta.vec()(j)));
}

TEST_CASE("batch_norm train-mode output statistics") {
  Rng rng(3);
  Tensor<double> x = random_tensor(Shape{64, 5}, rng, -2.0, 3.0);
  Tensor<double> gamma = Tensor<double>::constant(Shape{5}, 1.0);
  Tensor<double> beta(Shape{5});
  BatchNormState<double> state(5);

  Tape<double> tape;
  auto y = batch_norm(tape, tape.leaf(x), tape.leaf(gamma), tape.leaf(beta), state, Mode::kTrain);
  auto m = y->value.mat();
  for (Index c = 0; c < 5; ++c) {
    const double mean = m.col(c).mean();
    const double var = (m.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("batch_norm running statistics and eval mode") {
  Tensor<double> x(Shape{2, 1});
  x.mat() << 2.0, 6.0;  // batch mean 4, biased variance 4
  Tensor<double> gamma = Tensor<double>::constant(Shape{1}, 1.0);
  Tensor<double> beta(Shape{1});
  BatchNormState<double> state(1);

  {
    Tape<double> tape;
    batch_norm(tape, tape.leaf(x), tape.leaf(gamma), tape.leaf(beta), state, Mode::kTrain);
  }
  CHECK(state.running_mean(0) == doctest::Approx(0.9 * 0.0 + 0.1 * 4.0));
  CHECK(state.running_var(0) == doctest::Approx(0.9 * 1.0 + 0.1 * 4.0));

  // Eval normalizes by the running statistics, not the batch.
  Tape<double> tape;
  auto y = batch_norm(tape, tape.leaf(x), tape.leaf(gamma), tape.leaf(beta), state, Mode::kEval);
  const double inv = 1.0 / std::sqrt(state.running_var(0) + kBatchNormEpsilon);
  CHECK(y->value.mat()(0, 0) == doctest::Approx((2.0 - 0.4) * inv));
  CHECK(y->value.mat()(1, 0) == doctest::Approx((6.0 - 0.4) * inv));
}

TEST_CASE("batch_norm with one row uses variance zero plus epsilon") {
  Tensor<double> x(Shape{1, 2});
  x.mat() << 3.0, -7.0;
  Tensor<double> gamma = Tensor<double>::constant(Shape{2}, 2.0);
  Tensor<double> beta(Shape{2});
  beta.vec() << 0.5, -0.5;
  BatchNormState<double> state(2);

  Tape<double> tape;
  auto xin = tape.leaf(x, true);
  auto y = batch_norm(tape, xin, tape.leaf(gamma), tape.leaf(beta), state, Mode::kTrain);
  CHECK(y->value.mat()(0, 0) == doctest::Approx(0.5));
  CHECK(y->value.mat()(0, 1) == doctest::Approx(-0.5));

  Tensor<double> proj = Tensor<double>::constant(Shape{1, 2}, 1.0);
  auto s = weighted_sum(tape, y, proj);
  tape.backward(s);
  CHECK(xin->grad.data.abs().maxCoeff() == 0.0);
}

TEST_CASE("batch_norm gradcheck over 5 seeds (train mode)") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(seed, 13));
    Tensor<double> x = random_tensor(Shape{5, 3}, rng);
    Tensor<double> gamma = random_tensor(Shape{3}, rng, 0.5, 1.5);
    Tensor<double> beta = random_tensor(Shape{3}, rng);
    Tensor<double> proj = random_tensor(Shape{5, 3}, rng);

    auto report = gradcheck(
        [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
          BatchNormState<double> state(3);
          auto y = batch_norm(tape, in[0], in[1], in[2], state, Mode::kTrain);
          return weighted_sum(tape, y, proj);
        },
        {x, gamma, beta});
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("batch_norm gradcheck in eval mode") {
  Rng rng(99);
  Tensor<double> x = random_tensor(Shape{4, 2}, rng);
  Tensor<double> gamma = random_tensor(Shape{2}, rng, 0.5, 1.5);
  Tensor<double> beta = random_tensor(Shape{2}, rng);
  Tensor<double> proj = random_tensor(Shape{4, 2}, rng);
  BatchNormState<double> state(2);
  state.running_mean << 0.3, -0.2;
  state.running_var << 1.7, 0.6;

  auto report = gradcheck(
      [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
        auto y = batch_norm(tape, in[0], in[1], in[2], state, Mode::kEval);
        return weighted_sum(tape, y, proj);
      },
      {x, gamma, beta});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("relu values and dead gradients") {
  Tensor<double> x(Shape{3});
  x.vec() << -1, 0, 2;
  Tape<double> tape;
  auto y = relu(tape, tape.leaf(x));
  CHECK(y->value.vec()(0) == 0.0);
  CHECK(y->value.vec()(1) == 0.0);
  CHECK(y->value.vec()(2) == 2.0);

  Tensor<double> neg = Tensor<double>::constant(Shape{4, 2}, -3.0);
  auto nin = tape.leaf(neg, true);
  auto ny = relu(tape, nin);
  CHECK(ny->value.data.abs().maxCoeff() == 0.0);
  auto s = weighted_sum(tape, ny, Tensor<double>::constant(Shape{4, 2}, 1.0));
  tape.backward(s);
  CHECK(nin->grad.data.abs().maxCoeff() == 0.0);
}

TEST_CASE("relu gradcheck away from the kink") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(seed, 21));
    Tensor<double> x(Shape{6, 3});
    for (Index i = 0; i < x.numel(); ++i) {
      const double mag = rng.uniform(0.15, 1.0);
      x.data[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    Tensor<double> proj = random_tensor(Shape{6, 3}, rng);
    auto report = gradcheck(
        [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
          return weighted_sum(tape, relu(tape, in[0]), proj);
        },
        {x});
    CHECK(report.max_rel_err < 1e-6);
  }
}

TEST_CASE("max_pool_seq values, single row, permutation invariance") {
  Tensor<double> x(Shape{2, 2});
  x.mat() << 1, 5, 3, 2;
  Tape<double> tape;
  auto y = max_pool_seq(tape, tape.leaf(x));
  CHECK(y->value.vec()(0) == 3.0);
  CHECK(y->value.vec()(1) == 5.0);

  Tensor<double> one(Shape{1, 3});
  one.mat() << 4, -2, 0.5;
  auto y1 = max_pool_seq(tape, tape.leaf(one));
  CHECK((y1->value.vec().transpose() - one.mat().row(0)).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(5);
  Tensor<double> r = random_tensor(Shape{16, 4}, rng);
  auto base = max_pool_seq(tape, tape.leaf(r));
  for (int trial = 0; trial < 20; ++trial) {
    auto perm = rng.permutation(16);
    Tensor<double> shuffled(Shape{16, 4});
    for (Index i = 0; i < 16; ++i)
      shuffled.mat().row(i) = r.mat().row(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
    auto py = max_pool_seq(tape, tape.leaf(shuffled));
    CHECK((py->value.vec() - base->value.vec()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("max_pool_seq routes gradient to the first argmax") {
  Tensor<double> x(Shape{3, 1});
  x.mat() << 2.0, 7.0, 7.0;  // tie between rows 1 and 2
  Tape<double> tape;
  auto xin = tape.leaf(x, true);
  auto y = max_pool_seq(tape, xin);
  auto s = weighted_sum(tape, y, Tensor<double>::constant(Shape{1}, 1.0));
  tape.backward(s);
  CHECK(xin->grad.mat()(0, 0) == 0.0);
  CHECK(xin->grad.mat()(1, 0) == 1.0);
  CHECK(xin->grad.mat()(2, 0) == 0.0);
}

TEST_CASE("max_pool_seq gradcheck (tie-free inputs)") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(seed, 33));
    Tensor<double> x = random_tensor(Shape{7, 3}, rng);
    Tensor<double> proj = random_tensor(Shape{3}, rng);
    auto report = gradcheck(
        [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
          return weighted_sum(tape, max_pool_seq(tape, in[0]), proj);
        },
        {x});
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("tile_rows duplicates and sums back") {
  Tensor<double> x(Shape{2});
  x.vec() << 1, 2;
  Tape<double> tape;
  auto y = tile_rows(tape, tape.leaf(x), 3);
  CHECK(y->value.shape == Shape{3, 2});
  for (Index i = 0; i < 3; ++i) {
    CHECK(y->value.mat()(i, 0) == 1.0);
    CHECK(y->value.mat()(i, 1) == 2.0);
  }

  auto y1 = tile_rows(tape, tape.leaf(x), 1);
  CHECK(y1->value.shape == Shape{1, 2});

  // sum(tile_rows(x, 4)) has gradient exactly 4 per element.
  auto xin = tape.leaf(x, true);
  auto t4 = tile_rows(tape, xin, 4);
  auto s = weighted_sum(tape, t4, Tensor<double>::constant(Shape{4, 2}, 1.0));
  tape.backward(s);
  CHECK(xin->grad.vec()(0) == 4.0);
  CHECK(xin->grad.vec()(1) == 4.0);
}

TEST_CASE("concat_cols shapes and identity") {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>(Shape{5, 64}));
  auto b = tape.leaf(Tensor<double>(Shape{5, 1024}));
  auto y = concat_cols(tape, {a, b});
  CHECK(y->value.shape == Shape{5, 1088});

  auto c1 = tape.leaf(Tensor<double>(Shape{3, 1088}));
  auto c2 = tape.leaf(Tensor<double>(Shape{3, 1088}));
  auto c3 = tape.leaf(Tensor<double>(Shape{3, 1088}));
  CHECK(concat_cols(tape, {c1, c2, c3})->value.shape == Shape{3, 3264});

  Rng rng(8);
  Tensor<double> x = random_tensor(Shape{4, 6}, rng);
  auto single = concat_cols(tape, {tape.leaf(x)});
  CHECK((single->value.mat() - x.mat()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(concat_cols(tape, {a, tape.leaf(Tensor<double>(Shape{4, 2}))}), ShapeMismatch);
}

TEST_CASE("concat_cols gradcheck") {
  Rng rng(17);
  Tensor<double> a = random_tensor(Shape{4, 2}, rng);
  Tensor<double> b = random_tensor(Shape{4, 3}, rng);
  Tensor<double> proj = random_tensor(Shape{4, 5}, rng);
  auto report = gradcheck(
      [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
        return weighted_sum(tape, concat_cols(tape, {in[0], in[1]}), proj);
      },
      {a, b});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradient accumulation across two branches") {
  Rng rng(23);
  Tensor<double> x = random_tensor(Shape{3, 2}, rng);
  Tensor<double> w1 = random_tensor(Shape{3, 2}, rng);
  Tensor<double> w2 = random_tensor(Shape{3, 2}, rng);

  Tape<double> tape;
  auto xin = tape.leaf(x, true);
  auto s = add(tape, weighted_sum(tape, xin, w1), weighted_sum(tape, xin, w2));
  tape.backward(s);
  CHECK((xin->grad.data - (w1.data + w2.data)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax_cross_entropy uniform logits give ln C") {
  Tensor<double> logits(Shape{1, 3});
  Tape<double> tape;
  auto r = softmax_cross_entropy(tape, tape.leaf(logits), {1}, {1});
  CHECK(r.loss->value.value() == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("softmax_cross_entropy loss vanishes with growing margin") {
  double prev = 1e9;
  for (double margin : {2.0, 5.0, 10.0, 20.0}) {
    Tensor<double> logits(Shape{1, 4});
    logits.mat() << margin, 0, 0, 0;
    Tape<double> tape;
    auto r = softmax_cross_entropy(tape, tape.leaf(logits), {0}, {1});
    CHECK(r.loss->value.value() < prev);
    prev = r.loss->value.value();
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("softmax_cross_entropy matches the direct 64-bit formula") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(seed, 41));
    Tensor<double> logits = random_tensor(Shape{5, 4}, rng, -3.0, 3.0);
    std::vector<int> labels(5);
    std::vector<std::uint8_t> mask(5);
    for (auto& l : labels) l = static_cast<int>(rng.index(4));
    for (auto& m : mask) m = rng.uniform() < 0.7 ? 1 : 0;

    // Direct evaluation of the summed cross-entropy: -sum log softmax[label].
    double expected = 0.0;
    for (Index i = 0; i < 5; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      double z = 0.0;
      for (Index c = 0; c < 4; ++c) z += std::exp(logits.mat()(i, c));
      expected -= std::log(std::exp(logits.mat()(i, labels[static_cast<std::size_t>(i)])) / z);
    }

    Tape<double> tape;
    auto r = softmax_cross_entropy(tape, tape.leaf(logits), labels, mask);
    CHECK(r.loss->value.value() == doctest::Approx(expected).epsilon(1e-6));

    for (Index i = 0; i < 5; ++i) CHECK(r.scores.row(i).sum() == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("softmax_cross_entropy gradcheck over 5 seeds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(mix_seed(seed, 57));
    Tensor<double> logits = random_tensor(Shape{6, 3}, rng, -2.0, 2.0);
    std::vector<int> labels(6);
    for (auto& l : labels) l = static_cast<int>(rng.index(3));
    std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};

    auto report = gradcheck(
        [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
          return softmax_cross_entropy(tape, in[0], labels, mask).loss;
        },
        {logits});
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("softmax_cross_entropy masked-out rows get zero gradient") {
  Rng rng(61);
  Tensor<double> logits = random_tensor(Shape{3, 3}, rng);
  Tape<double> tape;
  auto lin = tape.leaf(logits, true);
  auto r = softmax_cross_entropy(tape, lin, {0, 1, 2}, {1, 0, 1});
  tape.backward(r.loss);
  CHECK(lin->grad.mat().row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lin->grad.mat().row(0).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("softmax_cross_entropy rejects out-of-range labels") {
  Tape<double> tape;
  auto logits = tape.leaf(Tensor<double>(Shape{2, 3}));
  CHECK_THROWS_AS(softmax_cross_entropy(tape, logits, {0, 3}, {1, 1}), LabelOutOfRange);
  CHECK_THROWS_AS(softmax_cross_entropy(tape, logits, {0, -1}, {1, 1}), LabelOutOfRange);
}

TEST_CASE("gradcheck is near-exact on a linear function") {
  Rng rng(71);
  Tensor<double> x = random_tensor(Shape{4, 3}, rng);
  Tensor<double> w = random_tensor(Shape{4, 3}, rng);
  auto report = gradcheck(
      [&](Tape<double>& tape, const std::vector<NodeRef<double>>& in) {
        return weighted_sum(tape, in[0], w);
      },
      {x});
  CHECK(report.max_rel_err < 1e-10);
}

TEST_CASE("backward requires a scalar loss") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>(Shape{2, 2}), true);
  CHECK_THROWS_AS(tape.backward(x), ShapeMismatch);
}
