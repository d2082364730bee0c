#pragma once

// On-disk dataset: a directory of raster files plus `manifest.csv`, one
// record per line:
//   file,volume_id,slice_index,position,split,label_file
// `label_file` is empty for unlabeled slices. Images are H x W single
// precision rasters; labels are H x W rasters holding integral class ids.
// `dataset.cfg` records the generator settings as `key = value` lines.

#include <cstdint>
#include <string>
#include <vector>

#include "dcl/data/phantom.hpp"
#include "dcl/data/slices.hpp"

namespace dcl::data {

struct DatasetSpec {
  PhantomSpec phantom;
  std::size_t volume_count = 40;
  std::size_t labeled = 4;
  std::size_t unlabeled = 28;
  std::size_t val = 2;
  std::size_t test = 6;
  std::uint64_t seed = 0;
};

struct ManifestRecord {
  std::string file;
  std::string volume_id;
  std::size_t slice_index = 0;
  double position = 0.0;
  Split split = Split::kLabeled;
  std::string label_file;
};

struct Dataset {
  std::vector<SliceRecord> slices;
  std::size_t num_classes = 0;  // C_fg + 1, read from dataset.cfg

  std::vector<const SliceRecord*> of_split(Split split) const;
};

inline constexpr const char* kManifestName = "manifest.csv";
inline constexpr const char* kDatasetConfigName = "dataset.cfg";

// Per-volume phantom seed derived from the dataset seed.
std::uint64_t volume_seed(std::uint64_t dataset_seed, std::size_t volume);

// Generates every volume in memory, then writes `dir` (created if missing).
// The output bytes depend only on the spec.
void generate_dataset(const DatasetSpec& spec, const std::string& dir);

std::string format_manifest_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line);

std::vector<ManifestRecord> read_manifest(const std::string& dir);

// Throws std::runtime_error on a missing directory, manifest or raster,
// and on records inconsistent with their rasters.
Dataset load_dataset(const std::string& dir);

}  // namespace dcl::data
