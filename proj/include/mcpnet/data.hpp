#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mcpnet/image.hpp"
#include "mcpnet/pointset.hpp"

namespace mcpnet {

struct ManifestRecord {
  std::string path;  // relative to the manifest directory
  std::string category;
  std::string split;  // "train" or "test"
};

// Dataset index: one manifest.json plus one <category>.spec.json per category,
// all in the same directory.
struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;
  std::map<std::string, CategorySpec> specs;
};

Manifest load_manifest(const std::filesystem::path& dir);
void save_manifest(const Manifest& manifest);

// Seeded stratified split: per category, a fresh shuffle assigns
// round(train_fraction * n) records to "train" and the rest to "test".
Manifest split(const Manifest& manifest, double train_fraction, std::uint64_t seed);

// Joint label space over every category in a manifest. Categories are ordered
// by name; a category's components map to a contiguous block of global ids.
struct LabelSpace {
  std::vector<std::string> categories;
  std::map<std::string, int> offsets;
  int num_classes = 0;

  static LabelSpace from(const Manifest& manifest);
  int offset_of(const std::string& category) const;
};

struct DatasetItem {
  LabeledPointSet points;  // labels are global ids
  std::string category;
};

struct Dataset {
  std::vector<DatasetItem> items;
  LabelSpace space;
  Index n_points = 0;
};

// Preprocesses every record of the chosen split ("train", "test" or "all")
// into labeled point sets: load, center onto the image's own canvas size,
// thin, extract. When caching is enabled, point sets are read from/written to
// a binary .pts sidecar next to each image.
Dataset load_dataset(const Manifest& manifest, const std::string& which_split, Index n_points,
                     bool use_cache);

// Writes (or refreshes) the .pts sidecar for every record in the manifest.
void preprocess_all(const Manifest& manifest, Index n_points);

// Seeded shuffle then contiguous chunks; the final partial chunk is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n_items, std::size_t batch_size,
                                                   std::uint64_t epoch_seed);

// Parametric synthetic sketch generator; template_id selects one of the
// built-in category layouts ("lamp", "chair", "rifle").
struct SynthConfig {
  std::string template_id = "lamp";
  int count = 10;
  std::uint64_t seed = 0;
  int canvas = 256;
  double jitter = 1.0;  // scales random geometry spread
  double noise = 1.0;   // scales control-point wobble
};

CategorySpec synth_category_spec(const std::string& template_id);

// Draws `count` sketches as 1-px strokes, writes PNGs, the category spec and
// a manifest (with a seeded stratified split) into out_dir.
Manifest gen_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                       double train_fraction);

}  // namespace mcpnet
