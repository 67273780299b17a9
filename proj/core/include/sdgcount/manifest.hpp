#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdgcount/data.hpp"
#include "sdgcount/image.hpp"

namespace sdgcount {

struct ManifestRecord {
  std::string id;
  std::filesystem::path image;       // absolute or relative to the manifest directory
  std::filesystem::path annotation;  // same
  std::string split;                 // e.g. "train" / "test"
  std::optional<std::string> label;  // scene or weather tag
};

/// Line-delimited JSON index: one object per line with keys
/// `image`, `annotation`, `split`, and optional `id`, `label`.
struct SampleManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::vector<ManifestRecord> with_split(const std::string& split) const;
};

/// Parses and checks every record; throws DataError listing all problems.
SampleManifest load_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest's directory where possible.
void save_manifest(const SampleManifest& manifest, const std::filesystem::path& path);

/// Seeded random train/test split of the records matching `label` (all when
/// unset); the train side gets round(fraction·n) records.
std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> build_splits(
    const SampleManifest& manifest, const std::optional<std::string>& label, double train_fraction,
    std::uint64_t seed);

/// An image with its point labels, loaded into memory.
struct LabeledImage {
  std::string id;
  Image image;
  PointAnnotation annotation;
};

/// Loads every record's image and annotation; throws DataError with one entry
/// per unreadable file.
std::vector<LabeledImage> load_dataset(const SampleManifest& manifest, const std::vector<ManifestRecord>& records);

}  // namespace sdgcount
