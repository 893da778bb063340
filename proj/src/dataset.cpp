#include <optional>

#include "mcpnet/bytes.hpp"
#include "mcpnet/data.hpp"
#include "mcpnet/sketchio.hpp"

namespace mcpnet {

namespace {

constexpr char kSidecarMagic[4] = {'M', 'C', 'P', 'T'};
constexpr std::uint32_t kSidecarVersion = 1;

std::filesystem::path sidecar_path(const std::filesystem::path& image) {
  auto p = image;
  p += ".pts";
  return p;
}

void write_sidecar(const LabeledPointSet& pts, const std::filesystem::path& path) {
  ByteWriter w;
  w.put_magic(kSidecarMagic);
  w.put_u32(kSidecarVersion);
  w.put_u32(static_cast<std::uint32_t>(pts.base.size()));
  w.put_u32(static_cast<std::uint32_t>(pts.base.n_original));
  for (Index i = 0; i < pts.base.size(); ++i) {
    w.put_f32(pts.base.points(i, 0));
    w.put_f32(pts.base.points(i, 1));
    w.put_u32(static_cast<std::uint32_t>(pts.labels[static_cast<std::size_t>(i)]));
  }
  w.put_crc32();
  w.write_file(path);
}

// Returns nullopt when the sidecar is missing or was built for another
// n_points; corrupt files throw.
std::optional<LabeledPointSet> read_sidecar(const std::filesystem::path& path, Index n_points) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  ByteReader r = ByteReader::from_file(path);
  r.verify_crc32();
  r.expect_magic(kSidecarMagic);
  if (r.get_u32() != kSidecarVersion) throw VersionMismatch("sidecar version: " + path.string());
  const auto n = static_cast<Index>(r.get_u32());
  if (n != n_points) return std::nullopt;

  LabeledPointSet pts;
  pts.base.points.resize(n, 2);
  pts.base.n_original = static_cast<Index>(r.get_u32());
  pts.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    pts.base.points(i, 0) = r.get_f32();
    pts.base.points(i, 1) = r.get_f32();
    pts.labels[static_cast<std::size_t>(i)] = static_cast<int>(r.get_u32());
  }
  return pts;
}

LabeledPointSet preprocess_record(const Manifest& manifest, const ManifestRecord& record,
                                  Index n_points) {
  const CategorySpec& spec = manifest.specs.at(record.category);
  SketchImage img = load_sketch(manifest.root / record.path, spec);
  const int canvas = std::max(img.width(), img.height());
  img = thin(crop_and_center(img, canvas));
  return extract_points(img, spec, n_points);
}

}  // namespace

Dataset load_dataset(const Manifest& manifest, const std::string& which_split, Index n_points,
                     bool use_cache) {
  Dataset ds;
  ds.space = LabelSpace::from(manifest);
  ds.n_points = n_points;

  for (const ManifestRecord& record : manifest.records) {
    if (which_split != "all" && record.split != which_split) continue;

    LabeledPointSet pts;
    const auto cache = sidecar_path(manifest.root / record.path);
    if (use_cache) {
      if (auto cached = read_sidecar(cache, n_points)) {
        pts = std::move(*cached);
      } else {
        pts = preprocess_record(manifest, record, n_points);
        write_sidecar(pts, cache);
      }
    } else {
      pts = preprocess_record(manifest, record, n_points);
    }

    const int offset = ds.space.offset_of(record.category);
    for (int& label : pts.labels) label += offset;
    ds.items.push_back({std::move(pts), record.category});
  }

  if (ds.items.empty())
    throw EmptyDataset("no records with split '" + which_split + "' in " +
                       manifest.root.string());
  return ds;
}

void preprocess_all(const Manifest& manifest, Index n_points) {
  for (const ManifestRecord& record : manifest.records) {
    LabeledPointSet pts = preprocess_record(manifest, record, n_points);
    write_sidecar(pts, sidecar_path(manifest.root / record.path));
  }
}

}  // namespace mcpnet
