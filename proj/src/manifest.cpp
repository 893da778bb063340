#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mcpnet/data.hpp"

namespace mcpnet {

Manifest load_manifest(const std::filesystem::path& dir) {
  const auto file = dir / "manifest.json";
  std::ifstream in(file);
  if (!in) throw IoError("cannot open manifest: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest JSON (" + file.string() + "): " + e.what());
  }

  Manifest m;
  m.root = dir;
  std::set<std::string> paths;
  try {
    for (const auto& rec : j.at("records")) {
      ManifestRecord r{rec.at("path").get<std::string>(), rec.at("category").get<std::string>(),
                       rec.at("split").get<std::string>()};
      if (r.split != "train" && r.split != "test")
        throw IoError("manifest record '" + r.path + "' has split '" + r.split + "'");
      if (!paths.insert(r.path).second)
        throw IoError("manifest lists '" + r.path + "' twice");
      m.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest JSON (" + file.string() + "): " + e.what());
  }

  for (const ManifestRecord& r : m.records) {
    if (m.specs.count(r.category)) continue;
    m.specs.emplace(r.category, load_category_spec(dir / (r.category + ".spec.json")));
  }
  return m;
}

void save_manifest(const Manifest& manifest) {
  nlohmann::json records = nlohmann::json::array();
  for (const ManifestRecord& r : manifest.records)
    records.push_back({{"path", r.path}, {"category", r.category}, {"split", r.split}});
  nlohmann::json j{{"records", records}};

  const auto file = manifest.root / "manifest.json";
  std::ofstream out(file);
  if (!out) throw IoError("cannot write manifest: " + file.string());
  out << j.dump(2) << '\n';

  for (const auto& [category, spec] : manifest.specs)
    save_category_spec(spec, manifest.root / (category + ".spec.json"));
}

Manifest split(const Manifest& manifest, double train_fraction, std::uint64_t seed) {
  if (manifest.records.empty()) throw EmptyManifest("cannot split an empty manifest");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("train fraction must lie strictly between 0 and 1");

  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    by_category[manifest.records[i].category].push_back(i);

  Manifest out = manifest;
  std::uint64_t stream = 0;
  for (auto& [category, indices] : by_category) {
    Rng rng(mix_seed(seed, stream++));
    rng.shuffle(indices);
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(indices.size())));
    for (std::size_t k = 0; k < indices.size(); ++k)
      out.records[indices[k]].split = k < n_train ? "train" : "test";
  }
  return out;
}

LabelSpace LabelSpace::from(const Manifest& manifest) {
  LabelSpace space;
  for (const auto& [category, spec] : manifest.specs) space.categories.push_back(category);
  std::sort(space.categories.begin(), space.categories.end());
  for (const std::string& category : space.categories) {
    space.offsets[category] = space.num_classes;
    space.num_classes += manifest.specs.at(category).num_components();
  }
  return space;
}

int LabelSpace::offset_of(const std::string& category) const {
  auto it = offsets.find(category);
  if (it == offsets.end()) throw Error("category '" + category + "' not in label space");
  return it->second;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n_items, std::size_t batch_size,
                                                   std::uint64_t epoch_seed) {
  if (batch_size < 1) throw Error("batch size must be >= 1");
  Rng rng(epoch_seed);
  std::vector<std::size_t> order = rng.permutation(n_items);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n_items; i += batch_size) {
    const std::size_t end = std::min(n_items, i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace mcpnet
