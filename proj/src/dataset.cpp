#include "cgt/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "cgt/image_io.hpp"

namespace cgt::data {

using json = nlohmann::json;

std::string to_json_line(const ManifestEntry& entry) {
  json boxes = json::array();
  for (const Box& b : entry.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  json j;
  j["id"] = entry.id;
  j["image_path"] = entry.image_path;
  j["boxes"] = boxes;
  return j.dump();
}

ManifestEntry entry_from_json_line(const std::string& line) {
  ManifestEntry e;
  try {
    const json j = json::parse(line);
    e.id = j.at("id").get<std::string>();
    e.image_path = j.at("image_path").get<std::string>();
    for (const auto& b : j.at("boxes")) {
      if (b.size() != 4) throw FormatError("box must have 4 coordinates");
      e.boxes.push_back(Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                            b[3].get<double>()});
    }
  } catch (const json::exception& ex) {
    throw FormatError(std::string("bad manifest record: ") + ex.what());
  }
  for (const Box& b : e.boxes)
    if (!b.valid()) throw IntegrityError("manifest box with non-positive area in '" + e.id + "'");
  return e;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    m.push_back(entry_from_json_line(line));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& e : manifest) out << to_json_line(e) << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

std::filesystem::path Dataset::image_path(const ManifestEntry& e) const {
  const std::filesystem::path p(e.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

Image Dataset::load_image(const ManifestEntry& e) const { return io::read_png(image_path(e)); }

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.entries = read_manifest(manifest_path);
  ds.base_dir = manifest_path.parent_path();
  return ds;
}

std::vector<train::Sample> load_samples(const Dataset& ds) {
  std::vector<train::Sample> out;
  out.reserve(ds.size());
  for (const auto& e : ds.entries) out.push_back(train::Sample{ds.load_image(e), e.boxes});
  return out;
}

std::vector<Image> load_images(const Dataset& ds) {
  std::vector<Image> out;
  out.reserve(ds.size());
  for (const auto& e : ds.entries) out.push_back(ds.load_image(e));
  return out;
}

Manifest rebase(const Dataset& ds, const std::filesystem::path& new_base) {
  Manifest out = ds.entries;
  for (auto& e : out)
    e.image_path = std::filesystem::absolute(ds.image_path(e))
                       .lexically_normal()
                       .lexically_relative(std::filesystem::absolute(new_base).lexically_normal())
                       .generic_string();
  return out;
}

}  // namespace cgt::data
