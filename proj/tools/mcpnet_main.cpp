// Command-line front end for the MCPNet sketch segmentation pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data/model error, 3 failed check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "mcpnet/checks.hpp"
#include "mcpnet/data.hpp"
#include "mcpnet/model.hpp"
#include "mcpnet/png_io.hpp"
#include "mcpnet/sketchio.hpp"
#include "mcpnet/train.hpp"

namespace {

using namespace mcpnet;

WidthFactor parse_width_factor(const std::string& text) {
  const auto slash = text.find('/');
  auto parse_u32 = [&](const std::string& s) {
    const unsigned long v = std::stoul(s);
    if (v == 0 || v > 0xFFFFFFFFul) throw InvalidConfig("width factor terms must be positive");
    return static_cast<std::uint32_t>(v);
  };
  try {
    if (slash != std::string::npos)
      return {parse_u32(text.substr(0, slash)), parse_u32(text.substr(slash + 1))};
    if (text.find('.') != std::string::npos) {
      // decimal: scale to a fraction over a power of ten
      const double v = std::stod(text);
      if (!(v > 0.0)) throw InvalidConfig("width factor must be > 0");
      std::uint32_t den = 1;
      double scaled = v;
      while (scaled != std::floor(scaled) && den < 100000000u) {
        scaled *= 10.0;
        den *= 10;
      }
      return {static_cast<std::uint32_t>(std::llround(scaled)), den};
    }
    return {parse_u32(text), 1};
  } catch (const std::exception&) {
    throw InvalidConfig("cannot parse width factor '" + text + "' (use e.g. 1, 1/8, 0.25)");
  }
}

std::vector<Index> parse_kernel_lengths(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(static_cast<Index>(std::stol(item)));
    } catch (const std::exception&) {
      throw InvalidConfig("cannot parse kernel lengths '" + text + "'");
    }
  }
  if (out.empty()) throw InvalidConfig("kernel length list is empty");
  return out;
}

struct NetOptions {
  int columns = 3;
  std::string kernel_lengths = "1,3,5";
  Index n_points = 512;
  std::string width_factor = "1";

  MCPNetConfig to_config(Index num_classes) const {
    const std::vector<Index> kernels = parse_kernel_lengths(kernel_lengths);
    if (columns < 1 || static_cast<std::size_t>(columns) > kernels.size())
      throw InvalidConfig("--columns must select 1.." + std::to_string(kernels.size()) +
                          " of the kernel-length list");
    MCPNetConfig cfg;
    for (int i = 0; i < columns; ++i)
      cfg.columns.push_back({kernels[static_cast<std::size_t>(i)], {64, 128, 1024}});
    cfg.num_classes = num_classes;
    cfg.n_points = n_points;
    cfg.width_factor = parse_width_factor(width_factor);
    cfg.validate();
    return cfg;
  }
};

void add_net_options(CLI::App* cmd, NetOptions& net) {
  cmd->add_option("--columns", net.columns, "Number of columns (MCPNet-x)")
      ->capture_default_str();
  cmd->add_option("--kernel-lengths", net.kernel_lengths,
                  "Comma-separated odd kernel lengths, one per potential column")
      ->capture_default_str();
  cmd->add_option("--points", net.n_points, "Points sampled per sketch (N)")
      ->capture_default_str();
  cmd->add_option("--width-factor", net.width_factor,
                  "Uniform channel-width scale (integer, fraction or decimal)")
      ->capture_default_str();
}

void print_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "command: " << command << '\n';
  for (const auto& [key, value] : kv) std::cout << "  " << key << ": " << value << '\n';
}

int run_gen_synthetic(const std::string& out_dir, const SynthConfig& cfg, double train_fraction) {
  print_config("gen-synthetic", {{"out", out_dir},
                                 {"template", cfg.template_id},
                                 {"count", std::to_string(cfg.count)},
                                 {"seed", std::to_string(cfg.seed)},
                                 {"canvas", std::to_string(cfg.canvas)},
                                 {"jitter", std::to_string(cfg.jitter)},
                                 {"noise", std::to_string(cfg.noise)},
                                 {"train_fraction", std::to_string(train_fraction)}});
  const Manifest manifest = gen_synthetic(cfg, out_dir, train_fraction);
  std::size_t n_train = 0;
  for (const ManifestRecord& r : manifest.records) n_train += r.split == "train";
  std::cout << "wrote " << manifest.records.size() << " sketches (" << n_train << " train, "
            << manifest.records.size() - n_train << " test) to " << out_dir << '\n';
  return 0;
}

int run_preprocess(const std::string& data_dir, Index n_points) {
  print_config("preprocess", {{"data", data_dir}, {"points", std::to_string(n_points)}});
  const Manifest manifest = load_manifest(data_dir);
  preprocess_all(manifest, n_points);
  std::cout << "preprocessed " << manifest.records.size() << " sketches into .pts sidecars\n";
  return 0;
}

int run_train(const std::string& data_dir, const std::string& model_out,
              const std::string& history_out, const NetOptions& net, const TrainConfig& tcfg,
              std::uint64_t model_seed, bool no_cache, bool deterministic) {
  print_config("train",
               {{"data", data_dir},
                {"out", model_out},
                {"history", history_out.empty() ? "(none)" : history_out},
                {"columns", std::to_string(net.columns)},
                {"kernel_lengths", net.kernel_lengths},
                {"points", std::to_string(net.n_points)},
                {"width_factor", net.width_factor},
                {"epochs", std::to_string(tcfg.epochs)},
                {"batch", std::to_string(tcfg.batch_size)},
                {"lr", std::to_string(tcfg.learning_rate)},
                {"momentum", std::to_string(tcfg.momentum)},
                {"weight_decay", std::to_string(tcfg.weight_decay)},
                {"seed", std::to_string(tcfg.seed)},
                {"eval_every", std::to_string(tcfg.eval_every)},
                {"cache", no_cache ? "off" : "on"},
                {"deterministic", deterministic ? "true" : "true (always)"}});

  const Manifest manifest = load_manifest(data_dir);
  const Dataset train_set = load_dataset(manifest, "train", net.n_points, !no_cache);
  Dataset val_set;
  bool have_val = true;
  try {
    val_set = load_dataset(manifest, "test", net.n_points, !no_cache);
  } catch (const EmptyDataset&) {
    have_val = false;
  }

  MCPNet<float> model = MCPNet<float>::init(
      net.to_config(static_cast<Index>(train_set.space.num_classes)), model_seed);
  const History history = fit(model, train_set, have_val ? &val_set : nullptr, tcfg);
  model.save(model_out);
  std::cout << "saved model to " << model_out << '\n';

  if (!history.epochs.empty()) {
    const EpochStats& last = history.epochs.back();
    std::cout << "final epoch " << last.epoch << ": mean train loss " << last.mean_train_loss;
    if (last.val_p) std::cout << ", val P " << *last.val_p << ", val C " << *last.val_c;
    std::cout << '\n';
  }
  if (!history_out.empty()) {
    std::ofstream out(history_out);
    if (!out) throw IoError("cannot write history: " + history_out);
    out << history.to_csv();
    std::cout << "wrote history to " << history_out << '\n';
  }
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_dir,
             const std::string& which_split, const std::string& csv_out, bool no_cache) {
  print_config("eval", {{"model", model_path},
                        {"data", data_dir},
                        {"split", which_split},
                        {"out", csv_out.empty() ? "(none)" : csv_out},
                        {"cache", no_cache ? "off" : "on"}});
  MCPNet<float> model = MCPNet<float>::load(model_path);
  const Manifest manifest = load_manifest(data_dir);
  const Dataset ds = load_dataset(manifest, which_split, model.config().n_points, !no_cache);
  const EvalReport r = report(model, ds);
  std::cout << r.to_text();
  if (!csv_out.empty()) {
    std::ofstream out(csv_out);
    if (!out) throw IoError("cannot write report: " + csv_out);
    out << r.to_csv();
  }
  return 0;
}

int run_predict(const std::string& model_path, const std::string& input,
                const std::string& spec_path, const std::string& output, int label_offset) {
  print_config("predict", {{"model", model_path},
                           {"input", input},
                           {"category_spec", spec_path},
                           {"out", output},
                           {"label_offset", std::to_string(label_offset)}});
  MCPNet<float> model = MCPNet<float>::load(model_path);
  const CategorySpec spec = load_category_spec(spec_path);

  SketchImage img = load_sketch(input, spec);
  const int canvas = std::max(img.width(), img.height());
  img = thin(crop_and_center(img, canvas));
  LabeledPointSet pts = extract_points(img, spec, model.config().n_points);

  std::vector<int> pred = model.predict(pts.base);
  for (int& label : pred) label -= label_offset;
  LabeledPointSet out = pts;
  out.labels = pred;
  write_png(labels_to_image(out, spec, canvas), output);
  std::cout << "wrote segmentation to " << output << '\n';
  return 0;
}

int run_perturb(const std::string& input, const std::string& spec_path, const std::string& output,
                const std::string& drop_name, int dots, std::uint64_t seed) {
  print_config("perturb", {{"input", input},
                           {"category_spec", spec_path},
                           {"out", output},
                           {"drop_component", drop_name.empty() ? "(none)" : drop_name},
                           {"dots", std::to_string(dots)},
                           {"seed", std::to_string(seed)}});
  const CategorySpec spec = load_category_spec(spec_path);
  std::optional<int> drop;
  if (!drop_name.empty()) {
    for (int i = 0; i < spec.num_components(); ++i)
      if (spec.components[static_cast<std::size_t>(i)].name == drop_name) drop = i;
    if (!drop)
      throw UnknownComponent("no component '" + drop_name + "' in '" + spec.category + "'");
  }
  const SketchImage img = load_sketch(input, spec);
  write_png(perturb(img, spec, drop, dots, seed), output);
  std::cout << "wrote perturbed sketch to " << output << '\n';
  return 0;
}

int run_gradcheck(std::uint64_t seed) {
  print_config("gradcheck", {{"seed", std::to_string(seed)}});
  const auto results = run_gradcheck_suite(seed);
  bool all_passed = true;
  double worst = 0.0;
  for (const CheckResult& r : results) {
    std::printf("%-24s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                r.passed ? "ok" : "FAILED");
    all_passed = all_passed && r.passed;
    worst = std::max(worst, r.max_rel_err);
  }
  std::printf("overall max rel err %.3e (tolerance %.1e)\n", worst, kGradCheckTolerance);
  return all_passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCPNet sketch segmentation pipeline"};
  app.require_subcommand(1);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a labeled synthetic sketch corpus");
  std::string gen_out;
  SynthConfig synth;
  double train_fraction = 0.75;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--template", synth.template_id, "Category template (lamp|chair|rifle)")
      ->capture_default_str();
  gen->add_option("--count", synth.count, "Number of sketches")->capture_default_str();
  gen->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  gen->add_option("--canvas", synth.canvas, "Canvas size in pixels (>= 64)")
      ->capture_default_str();
  gen->add_option("--jitter", synth.jitter, "Geometry spread scale")->capture_default_str();
  gen->add_option("--noise", synth.noise, "Control-point wobble scale")->capture_default_str();
  gen->add_option("--train-fraction", train_fraction, "Stratified train split fraction")
      ->capture_default_str();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Build .pts sidecars for a dataset");
  std::string pre_data;
  Index pre_points = 512;
  pre->add_option("--data", pre_data, "Dataset directory with manifest.json")->required();
  pre->add_option("--points", pre_points, "Points sampled per sketch (N)")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  std::string train_data, train_out = "model.mcpn", train_history;
  NetOptions train_net;
  TrainConfig tcfg;
  bool train_no_cache = false;
  bool deterministic = false;
  train_cmd->add_option("--data", train_data, "Dataset directory with manifest.json")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint output path")->capture_default_str();
  train_cmd->add_option("--history", train_history, "Training history CSV path");
  add_net_options(train_cmd, train_net);
  train_cmd->add_option("--epochs", tcfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", tcfg.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", tcfg.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--weight-decay", tcfg.weight_decay, "L2 weight decay")
      ->capture_default_str();
  train_cmd->add_option("--seed", tcfg.seed, "Seed for init and shuffling")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tcfg.eval_every, "Validation cadence in epochs")
      ->capture_default_str();
  train_cmd->add_flag("--no-cache", train_no_cache, "Do not read or write .pts sidecars");
  train_cmd->add_flag("--deterministic", deterministic,
                      "Deterministic execution (always on; flag kept for interface stability)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset split");
  std::string eval_model, eval_data, eval_split = "test", eval_out;
  bool eval_no_cache = false;
  eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory with manifest.json")->required();
  eval_cmd->add_option("--split", eval_split, "Split to evaluate (train|test|all)")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report CSV path");
  eval_cmd->add_flag("--no-cache", eval_no_cache, "Do not read or write .pts sidecars");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Segment one sketch image");
  std::string pr_model, pr_input, pr_spec, pr_out = "prediction.png";
  int pr_offset = 0;
  predict_cmd->add_option("--model", pr_model, "Checkpoint path")->required();
  predict_cmd->add_option("--input", pr_input, "Input PNG")->required();
  predict_cmd->add_option("--category-spec", pr_spec, "Category spec JSON")->required();
  predict_cmd->add_option("--out", pr_out, "Output PNG")->capture_default_str();
  predict_cmd->add_option("--label-offset", pr_offset,
                          "Global label offset of this category in the trained label space")
      ->capture_default_str();

  // perturb
  auto* perturb_cmd = app.add_subcommand("perturb", "Apply the noise model to a sketch");
  std::string pe_input, pe_spec, pe_out = "perturbed.png", pe_drop;
  int pe_dots = 0;
  std::uint64_t pe_seed = 0;
  perturb_cmd->add_option("--input", pe_input, "Input PNG")->required();
  perturb_cmd->add_option("--category-spec", pe_spec, "Category spec JSON")->required();
  perturb_cmd->add_option("--out", pe_out, "Output PNG")->capture_default_str();
  perturb_cmd->add_option("--drop-component", pe_drop, "Component name to remove");
  perturb_cmd->add_option("--dots", pe_dots, "Number of random dots to add")
      ->capture_default_str();
  perturb_cmd->add_option("--seed", pe_seed, "Noise seed")->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  std::uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "Base seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return run_gen_synthetic(gen_out, synth, train_fraction);
    if (*pre) return run_preprocess(pre_data, pre_points);
    if (*train_cmd)
      return run_train(train_data, train_out, train_history, train_net, tcfg, tcfg.seed,
                       train_no_cache, deterministic);
    if (*eval_cmd) return run_eval(eval_model, eval_data, eval_split, eval_out, eval_no_cache);
    if (*predict_cmd) return run_predict(pr_model, pr_input, pr_spec, pr_out, pr_offset);
    if (*perturb_cmd) return run_perturb(pe_input, pe_spec, pe_out, pe_drop, pe_dots, pe_seed);
    if (*gc) return run_gradcheck(gc_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
