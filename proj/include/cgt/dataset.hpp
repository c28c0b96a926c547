#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cgt/box.hpp"
#include "cgt/tensor.hpp"
#include "cgt/training.hpp"

namespace cgt::data {

/// One manifest record. `image_path` is relative to the manifest's directory
/// unless absolute.
struct ManifestEntry {
  std::string id;
  std::string image_path;
  Boxes boxes;
  bool operator==(const ManifestEntry&) const = default;
};

using Manifest = std::vector<ManifestEntry>;

/// JSON-lines: {"id", "image_path", "boxes": [[x1,y1,x2,y2], ...]} per line.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Canonical one-line JSON of an entry (stable key order).
std::string to_json_line(const ManifestEntry& entry);
ManifestEntry entry_from_json_line(const std::string& line);

/// A manifest together with the directory its relative paths resolve against.
struct Dataset {
  Manifest entries;
  std::filesystem::path base_dir;

  std::filesystem::path image_path(const ManifestEntry& e) const;
  Image load_image(const ManifestEntry& e) const;
  std::size_t size() const noexcept { return entries.size(); }
};

Dataset load_dataset(const std::filesystem::path& manifest_path);
std::vector<train::Sample> load_samples(const Dataset& ds);
std::vector<Image> load_images(const Dataset& ds);

/// Rebases entries so their paths resolve against `new_base`.
Manifest rebase(const Dataset& ds, const std::filesystem::path& new_base);

}  // namespace cgt::data
