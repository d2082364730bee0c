#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace dcl::train {

// Per-class scores over a set of volumes. Per volume, TP/FP/FN are summed
// over all its slices; a class absent from a volume's ground truth is skipped
// for that volume. Means are over present foreground classes within a volume,
// then over volumes. Per-class values average over the volumes containing
// the class (NaN when no volume does).
struct SegmentationScores {
  std::vector<double> dice;  // index c - 1
  std::vector<double> ji;
  double dice_mean = 0.0;
  double ji_mean = 0.0;
  std::size_t volumes = 0;
};

class VolumeScorer {
 public:
  explicit VolumeScorer(std::size_t num_foreground);

  // prediction and label: class ids of one slice (same length).
  void add(const std::string& volume_id, const std::vector<std::uint8_t>& prediction,
           const std::vector<std::uint8_t>& label);
  SegmentationScores result() const;

 private:
  struct Counts {
    std::vector<std::uint64_t> tp, fp, fn, present;
  };
  std::size_t num_foreground_;
  std::map<std::string, Counts> volumes_;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// One CSV row. NaN fields are written empty and read back as NaN.
struct MetricsRow {
  std::size_t epoch = 0;
  std::string split;  // "stage1", "stage2" (scores on val) or the evaluated split
  double loss_gcl = kMissing;
  double loss_seg = kMissing;
  double loss_cons = kMissing;
  double loss_lcl = kMissing;
  double lambda3 = kMissing;
  double dice_mean = kMissing;
  double ji_mean = kMissing;
  std::vector<double> dice;  // per foreground class
};

struct MetricsReport {
  std::size_t num_foreground = 0;
  std::vector<MetricsRow> rows;
  // Wall-clock seconds per stage; kept out of the CSV so it stays reproducible.
  std::map<std::string, double> seconds;
};

std::string metrics_header(std::size_t num_foreground);
std::string format_metrics_row(const MetricsRow& row, std::size_t num_foreground);

// Header line plus one line per row.
void save_metrics(const MetricsReport& report, const std::string& path);
// Throws std::runtime_error on a malformed file.
MetricsReport load_metrics(const std::string& path);

}  // namespace dcl::train
