#include "sdgcount/manifest.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "sdgcount/errors.hpp"
#include "sdgcount/rng.hpp"

namespace sdgcount {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& root, const fs::path& p) { return p.is_absolute() ? p : root / p; }

}  // namespace

std::vector<ManifestRecord> SampleManifest::with_split(const std::string& split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r);
  return out;
}

SampleManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  SampleManifest manifest;
  manifest.root = path.parent_path();
  std::vector<std::string> problems;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      problems.push_back(where + ": not valid JSON");
      continue;
    }
    if (!doc.is_object()) {
      problems.push_back(where + ": record is not an object");
      continue;
    }
    bool ok = true;
    for (const char* key : {"image", "annotation", "split"}) {
      if (!doc.contains(key) || !doc[key].is_string()) {
        problems.push_back(where + ": missing string field '" + key + "'");
        ok = false;
      }
    }
    if (!ok) continue;
    ManifestRecord rec;
    rec.image = doc["image"].get<std::string>();
    rec.annotation = doc["annotation"].get<std::string>();
    rec.split = doc["split"].get<std::string>();
    rec.id = doc.contains("id") ? doc["id"].get<std::string>() : rec.image.stem().string();
    if (doc.contains("label") && doc["label"].is_string()) rec.label = doc["label"].get<std::string>();
    for (const auto& p : {rec.image, rec.annotation}) {
      if (!fs::exists(resolve(manifest.root, p))) problems.push_back(where + ": missing file " + p.string());
    }
    manifest.records.push_back(std::move(rec));
  }
  if (!problems.empty()) throw DataError("invalid manifest " + path.string(), problems);
  return manifest;
}

void save_manifest(const SampleManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : manifest.records) {
    nlohmann::json doc;
    doc["id"] = r.id;
    doc["image"] = r.image.generic_string();
    doc["annotation"] = r.annotation.generic_string();
    doc["split"] = r.split;
    if (r.label) doc["label"] = *r.label;
    out << doc.dump() << "\n";
  }
}

std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> build_splits(
    const SampleManifest& manifest, const std::optional<std::string>& label, double train_fraction,
    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("build_splits: train_fraction must be in (0,1)");
  }
  std::vector<ManifestRecord> pool;
  for (const auto& r : manifest.records)
    if (!label || (r.label && *r.label == *label)) pool.push_back(r);
  Rng rng = Rng::derive(seed, {0x5b1175ULL});
  rng.shuffle(pool);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pool.size())));
  std::vector<ManifestRecord> train(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<ManifestRecord> test(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
  return {std::move(train), std::move(test)};
}

std::vector<LabeledImage> load_dataset(const SampleManifest& manifest, const std::vector<ManifestRecord>& records) {
  std::vector<LabeledImage> out;
  std::vector<std::string> problems;
  for (const auto& r : records) {
    try {
      LabeledImage item;
      item.id = r.id;
      item.image = load_png(resolve(manifest.root, r.image));
      item.annotation = load_annotation(resolve(manifest.root, r.annotation));
      item.annotation.image_id = r.id;
      out.push_back(std::move(item));
    } catch (const DataError& e) {
      problems.push_back(r.id + ": " + e.what());
    }
  }
  if (!problems.empty()) throw DataError("failed to load dataset", problems);
  return out;
}

}  // namespace sdgcount
