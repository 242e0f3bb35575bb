#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ram/annotation.hpp"
#include "ram/error.hpp"
#include "ram/evaluation.hpp"
#include "ram/parallel.hpp"
#include "ram/random.hpp"
#include "ram/summation.hpp"

// Manifest JSON:
// {
//   "split_seed": 42,
//   "train_count": 13000,          (optional)
//   "test_count": 500,             (optional)
//   "entries": [
//     {"annotation": "sss/a.xml", "image": "sss/a.png", "subset": "SSS", "id": "a"}
//   ]
// }
// Paths are relative to the manifest file. "id" defaults to the annotation file stem.

namespace ram {

struct ManifestEntry {
  std::string id;
  std::filesystem::path annotation;
  std::filesystem::path image;
  SubsetTag subset = SubsetTag::Other;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t split_seed = 42;
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> test_count;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  try {
    m.split_seed = j.value("split_seed", std::uint64_t{42});
    if (j.contains("train_count")) m.train_count = j.at("train_count").get<std::size_t>();
    if (j.contains("test_count")) m.test_count = j.at("test_count").get<std::size_t>();
    std::set<std::string> seen_paths;
    std::set<std::string> seen_ids;
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      const auto ann = e.at("annotation").get<std::string>();
      entry.annotation = base_dir / ann;
      if (e.contains("image")) entry.image = base_dir / e.at("image").get<std::string>();
      entry.subset = parse_subset_tag(e.value("subset", std::string("other")));
      entry.id = e.value("id", std::filesystem::path(ann).stem().string());
      if (!seen_paths.insert(entry.annotation.lexically_normal().string()).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate annotation path in manifest: " + ann);
      }
      if (!seen_ids.insert(entry.id).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate image id in manifest: " + entry.id);
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m, const std::filesystem::path& base_dir) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json je{{"id", e.id},
                      {"annotation", e.annotation.lexically_relative(base_dir).generic_string()},
                      {"subset", to_string(e.subset)}};
    if (!e.image.empty()) je["image"] = e.image.lexically_relative(base_dir).generic_string();
    entries.push_back(std::move(je));
  }
  nlohmann::json j{{"split_seed", m.split_seed}, {"entries", std::move(entries)}};
  if (m.train_count) j["train_count"] = *m.train_count;
  if (m.test_count) j["test_count"] = *m.test_count;
  return j;
}

/// Reads and parses one entry's annotation; the manifest's id and subset tag win
/// over whatever the XML carries.
inline AnnotatedImage load_annotation(const ManifestEntry& entry, const ParseOptions& options = {},
                                      std::vector<std::string>* warnings = nullptr) {
  AnnotatedImage img = parse_annotation(read_text_file(entry.annotation), options, warnings);
  img.image_id = entry.id;
  img.subset = entry.subset;
  return img;
}

inline std::vector<AnnotatedImage> load_annotations(std::span<const ManifestEntry> entries,
                                                    const ParseOptions& options = {}, std::size_t threads = 1) {
  std::vector<std::optional<AnnotatedImage>> slots(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) { slots[i] = load_annotation(entries[i], options); });
  std::vector<AnnotatedImage> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Fisher-Yates shuffle driven by SplitMix64 (index draw: next() % (i + 1)),
/// then the first train_count entries train and the next test_count test.
inline std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split(const DatasetManifest& manifest,
                                                                                std::size_t train_count,
                                                                                std::size_t test_count,
                                                                                std::uint64_t seed) {
  const std::size_t n = manifest.entries.size();
  if (train_count + test_count > n) {
    throw Error(ErrorCode::InsufficientEntries, "requested " + std::to_string(train_count) + " + " +
                                                    std::to_string(test_count) + " entries, manifest has " +
                                                    std::to_string(n));
  }
  std::vector<ManifestEntry> shuffled = manifest.entries;
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next() % i);
    std::swap(shuffled[i - 1], shuffled[j]);
  }
  std::vector<ManifestEntry> train(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<ManifestEntry> test(shuffled.begin() + static_cast<std::ptrdiff_t>(train_count),
                                  shuffled.begin() + static_cast<std::ptrdiff_t>(train_count + test_count));
  return {std::move(train), std::move(test)};
}

/// Train and test entries as the manifest declares them; without counts every
/// entry lands on both sides.
inline std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> manifest_splits(const DatasetManifest& m) {
  if (!m.train_count && !m.test_count) return {m.entries, m.entries};
  const std::size_t train = m.train_count.value_or(m.entries.size() - std::min(m.entries.size(), *m.test_count));
  const std::size_t test = m.test_count.value_or(m.entries.size() - std::min(m.entries.size(), train));
  return split(m, train, test, m.split_seed);
}

struct AnchorDims {
  double w = 0.0;
  double h = 0.0;
};

/// Mean w and h over every box of the given images.
inline AnchorDims anchor_dims_from(std::span<const AnnotatedImage> images) {
  std::vector<double> ws, hs;
  for (const auto& img : images) {
    for (const auto& b : img.boxes) {
      ws.push_back(b.w);
      hs.push_back(b.h);
    }
  }
  if (ws.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no boxes in the training annotations");
  const double n = static_cast<double>(ws.size());
  return {pairwise_sum(ws) / n, pairwise_sum(hs) / n};
}

inline AnchorDims anchor_dims_from(const DatasetManifest& manifest, const ParseOptions& options = {},
                                   std::size_t threads = 1) {
  const auto train = manifest_splits(manifest).first;
  const auto images = load_annotations(train, options, threads);
  return anchor_dims_from(images);
}

}  // namespace ram
