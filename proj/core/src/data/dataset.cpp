#include "dcl/data/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dcl/data/raster.hpp"

namespace dcl::data {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string volume_name(std::size_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "vol%03zu", v);
  return buf;
}

std::size_t parse_size(const std::string& s, const char* what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::runtime_error(std::string("dataset: bad ") + what + " '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error(std::string("dataset: bad ") + what + " '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::map<std::string, std::string> read_dataset_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("dataset: malformed line in " + path.string());
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

std::vector<const SliceRecord*> Dataset::of_split(Split split) const {
  std::vector<const SliceRecord*> out;
  for (const auto& s : slices)
    if (s.split == split) out.push_back(&s);
  return out;
}

std::uint64_t volume_seed(std::uint64_t dataset_seed, std::size_t volume) {
  // SplitMix64 finaliser over the pair.
  std::uint64_t z = dataset_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(volume) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string format_manifest_line(const ManifestRecord& r) {
  for (const auto* field : {&r.file, &r.volume_id, &r.label_file}) {
    if (field->find_first_of(",\n\r") != std::string::npos) {
      throw std::invalid_argument("manifest: field '" + *field + "' contains a separator");
    }
  }
  return r.file + "," + r.volume_id + "," + std::to_string(r.slice_index) + "," +
         format_double(r.position) + "," + std::string(split_name(r.split)) + "," + r.label_file;
}

ManifestRecord parse_manifest_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  if (fields.size() != 6) {
    throw std::runtime_error("manifest: expected 6 fields, got " + std::to_string(fields.size()) +
                             " in '" + line + "'");
  }
  ManifestRecord r;
  r.file = fields[0];
  r.volume_id = fields[1];
  r.slice_index = parse_size(fields[2], "slice index");
  r.position = parse_double(fields[3], "position");
  try {
    r.split = parse_split(fields[4]);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("manifest: ") + e.what());
  }
  r.label_file = fields[5];
  if (r.file.empty()) throw std::runtime_error("manifest: empty file name in '" + line + "'");
  if (!(r.position >= 0.0 && r.position <= 1.0)) {
    throw std::runtime_error("manifest: position outside [0, 1] in '" + line + "'");
  }
  if ((r.split == Split::kUnlabeled) != r.label_file.empty()) {
    throw std::runtime_error("manifest: label file must be present exactly for labeled/val/test "
                             "records, in '" + line + "'");
  }
  return r;
}

void generate_dataset(const DatasetSpec& spec, const std::string& dir) {
  const SplitAssignment assignment =
      split_dataset(spec.volume_count, spec.labeled, spec.unlabeled, spec.val, spec.test, spec.seed);

  fs::create_directories(dir);
  std::ostringstream manifest;
  for (std::size_t v = 0; v < spec.volume_count; ++v) {
    const auto split = assignment.split_of(v);
    if (!split) continue;  // surplus volumes are not written
    PhantomSpec ps = spec.phantom;
    ps.seed = volume_seed(spec.seed, v);
    const Phantom phantom = gen_phantom(ps);
    const std::string id = volume_name(v);
    for (const auto& slice : slice_volume(phantom.intensity, phantom.labels, id, *split)) {
      ManifestRecord rec;
      const std::string stem = id + "_z" + std::to_string(slice.slice_index);
      rec.file = stem + ".img.dclt";
      rec.volume_id = id;
      rec.slice_index = slice.slice_index;
      rec.position = slice.position;
      rec.split = slice.split;
      write_raster((fs::path(dir) / rec.file).string(), slice.image, stem);
      if (slice.label) {
        rec.label_file = stem + ".lbl.dclt";
        Tensor<float> label({slice.height(), slice.width()});
        auto out = label.mutable_data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>((*slice.label)[i]);
        write_raster((fs::path(dir) / rec.label_file).string(), label, stem + "/label");
      }
      manifest << format_manifest_line(rec) << '\n';
    }
  }

  std::ofstream(fs::path(dir) / kManifestName, std::ios::binary) << manifest.str();
  std::ofstream cfg(fs::path(dir) / kDatasetConfigName, std::ios::binary);
  cfg << "depth = " << spec.phantom.depth << '\n'
      << "height = " << spec.phantom.height << '\n'
      << "width = " << spec.phantom.width << '\n'
      << "organs = " << spec.phantom.organs << '\n'
      << "noise_sigma = " << format_double(spec.phantom.noise_sigma) << '\n'
      << "distractors = " << spec.phantom.distractors << '\n'
      << "bias_field = " << format_double(spec.phantom.bias_field) << '\n'
      << "volumes = " << spec.volume_count << '\n'
      << "labeled = " << spec.labeled << '\n'
      << "unlabeled = " << spec.unlabeled << '\n'
      << "val = " << spec.val << '\n'
      << "test = " << spec.test << '\n'
      << "seed = " << spec.seed << '\n';
  if (!cfg) throw std::runtime_error("dataset: failed writing " + dir);
}

std::vector<ManifestRecord> read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / kManifestName;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: missing manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_manifest_line(line));
  }
  return out;
}

Dataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset: no such directory '" + dir + "'");
  Dataset ds;
  const auto cfg = read_dataset_config(fs::path(dir) / kDatasetConfigName);
  const auto organs = cfg.find("organs");
  if (organs == cfg.end()) throw std::runtime_error("dataset: dataset.cfg lacks 'organs'");
  ds.num_classes = parse_size(organs->second, "organ count") + 1;

  for (const auto& rec : read_manifest(dir)) {
    SliceRecord s;
    s.image = read_raster<float>((fs::path(dir) / rec.file).string());
    if (s.image.rank() != 2) {
      throw std::runtime_error("dataset: " + rec.file + " is not an H x W raster");
    }
    s.position = rec.position;
    s.volume_id = rec.volume_id;
    s.slice_index = rec.slice_index;
    s.split = rec.split;
    if (!rec.label_file.empty()) {
      const auto label = read_raster<float>((fs::path(dir) / rec.label_file).string());
      if (label.shape() != s.image.shape()) {
        throw std::runtime_error("dataset: label " + rec.label_file + " shape " +
                                 shape_str(label.shape()) + " differs from image " +
                                 shape_str(s.image.shape()));
      }
      std::vector<std::uint8_t> ids(label.numel());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const float v = label.data()[i];
        if (!(v >= 0.0f) || v >= static_cast<float>(ds.num_classes) || v != std::floor(v)) {
          throw std::runtime_error("dataset: label " + rec.label_file + " holds invalid class " +
                                   std::to_string(v));
        }
        ids[i] = static_cast<std::uint8_t>(v);
      }
      s.label = std::move(ids);
    }
    ds.slices.push_back(std::move(s));
  }
  if (ds.slices.empty()) throw std::runtime_error("dataset: manifest in '" + dir + "' has no records");
  return ds;
}

}  // namespace dcl::data
