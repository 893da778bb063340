#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcpnet/data.hpp"
#include "mcpnet/metrics.hpp"
#include "mcpnet/model.hpp"

namespace mcpnet {

struct TrainConfig {
  int batch_size = 10;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int epochs = 50;
  std::uint64_t seed = 0;
  int eval_every = 5;

  void validate() const {
    if (batch_size < 1) throw InvalidConfig("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidConfig("learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw InvalidConfig("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw InvalidConfig("weight decay must be >= 0");
    if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
    if (eval_every < 1) throw InvalidConfig("eval_every must be >= 1");
  }
};

// Momentum SGD: v <- momentum*v + g + weight_decay*p; p <- p - lr*v.
template <typename Scalar>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(MCPNet<Scalar>& model) {
    model.visit_trainable([this](Tensor<Scalar>& t, typename MCPNet<Scalar>::ParamKind) {
      velocity_.emplace_back(t.shape);
    });
  }

  void step(MCPNet<Scalar>& model, const std::vector<Tensor<Scalar>>& grads,
            const TrainConfig& cfg) {
    if (grads.size() != velocity_.size())
      throw ShapeMismatch("gradient list does not match parameter count");
    std::size_t i = 0;
    model.visit_trainable([&](Tensor<Scalar>& p, typename MCPNet<Scalar>::ParamKind) {
      const Tensor<Scalar>& g = grads[i];
      Tensor<Scalar>& v = velocity_[i];
      if (g.shape != p.shape || v.shape != p.shape)
        throw ShapeMismatch("gradient shape does not match parameter");
      v.data = Scalar(cfg.momentum) * v.data + g.data + Scalar(cfg.weight_decay) * p.data;
      p.data -= Scalar(cfg.learning_rate) * v.data;
      ++i;
    });
  }

  const std::vector<Tensor<Scalar>>& velocity() const { return velocity_; }

 private:
  std::vector<Tensor<Scalar>> velocity_;
};

// Summed cross-entropy over every sample of the batch; every point (padded
// duplicates included) carries weight 1 during training.
template <typename Scalar>
NodeRef<Scalar> loss_batch_node(Tape<Scalar>& tape, MCPNet<Scalar>& model,
                                BoundModel<Scalar>& bound,
                                const std::vector<const LabeledPointSet*>& batch, Mode mode) {
  if (batch.empty()) throw EmptyDataset("loss_batch: empty batch");
  const Index n = batch.front()->base.size();
  NodeRef<Scalar> total = nullptr;
  for (const LabeledPointSet* sample : batch) {
    if (sample->base.size() != n)
      throw ShapeMismatch("loss_batch: samples must share the point count");
    NodeRef<Scalar> points = tape.leaf(sample->base.template to_tensor<Scalar>());
    NodeRef<Scalar> logits = model.forward_logits(tape, bound, points, mode);
    const std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 1);
    NodeRef<Scalar> loss = softmax_cross_entropy(tape, logits, sample->labels, mask).loss;
    total = total ? add(tape, total, loss) : loss;
  }
  return total;
}

template <typename Scalar>
double loss_batch(MCPNet<Scalar>& model, const std::vector<const LabeledPointSet*>& batch,
                  Mode mode = Mode::kTrain) {
  Tape<Scalar> tape;
  BoundModel<Scalar> bound = model.bind(tape, /*requires_grad=*/false);
  return static_cast<double>(loss_batch_node(tape, model, bound, batch, mode)->value.value());
}

struct EpochStats {
  int epoch = 0;
  double mean_train_loss = 0.0;  // per point, for readable curves
  std::optional<double> val_p;
  std::optional<double> val_c;
};

struct History {
  std::vector<EpochStats> epochs;

  std::string to_csv() const {
    std::ostringstream os;
    os << "epoch,mean_train_loss,val_p_metric,val_c_metric\n";
    os.precision(10);
    for (const EpochStats& e : epochs) {
      os << e.epoch << ',' << e.mean_train_loss << ',';
      if (e.val_p) os << *e.val_p;
      os << ',';
      if (e.val_c) os << *e.val_c;
      os << '\n';
    }
    return os.str();
  }
};

// Evaluates a model over a dataset: per-category micro averages, then an
// unweighted mean across categories.
template <typename Scalar>
EvalReport report(MCPNet<Scalar>& model, const Dataset& ds) {
  if (ds.items.empty()) throw EmptyDataset("report: empty dataset");
  ReportBuilder builder(ds.space.num_classes);
  for (const DatasetItem& item : ds.items)
    builder.add(item.category, model.predict(item.points.base), item.points);
  return builder.finish();
}

// Epochs of seeded shuffling, mini-batch forward/backward and momentum SGD.
// The optimizer works on the summed batch loss; history records the mean
// per-point loss. Fully deterministic for a fixed (seed, data, config).
template <typename Scalar>
History fit(MCPNet<Scalar>& model, const Dataset& train_set, const Dataset* val_set,
            const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.items.empty()) throw EmptyDataset("fit: empty training set");

  SgdOptimizer<Scalar> optimizer(model);
  History history;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches =
        make_batches(train_set.items.size(), static_cast<std::size_t>(cfg.batch_size),
                     mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));

    double epoch_loss = 0.0;
    long epoch_points = 0;
    for (const std::vector<std::size_t>& batch_ids : batches) {
      std::vector<const LabeledPointSet*> batch;
      batch.reserve(batch_ids.size());
      for (std::size_t id : batch_ids) batch.push_back(&train_set.items[id].points);

      Tape<Scalar> tape;
      BoundModel<Scalar> bound = model.bind(tape, /*requires_grad=*/true);
      NodeRef<Scalar> loss = loss_batch_node(tape, model, bound, batch, Mode::kTrain);
      tape.backward(loss);
      optimizer.step(model, model.collect_gradients(bound), cfg);

      epoch_loss += static_cast<double>(loss->value.value());
      epoch_points += static_cast<long>(batch.size()) *
                      static_cast<long>(batch.front()->base.size());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_train_loss = epoch_loss / double(epoch_points);
    if (val_set && !val_set->items.empty() &&
        (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const EvalReport r = report(model, *val_set);
      stats.val_p = r.overall_p;
      stats.val_c = r.overall_c;
    }
    history.epochs.push_back(stats);
  }
  return history;
}

}  // namespace mcpnet
