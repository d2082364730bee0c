#include "dcl/train/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcl::train {

VolumeScorer::VolumeScorer(std::size_t num_foreground) : num_foreground_(num_foreground) {
  if (num_foreground == 0) throw std::invalid_argument("VolumeScorer: need at least one foreground class");
}

void VolumeScorer::add(const std::string& volume_id, const std::vector<std::uint8_t>& prediction,
                       const std::vector<std::uint8_t>& label) {
  if (prediction.size() != label.size()) {
    throw std::invalid_argument("VolumeScorer: prediction has " + std::to_string(prediction.size()) +
                                " pixels, label " + std::to_string(label.size()));
  }
  auto& v = volumes_[volume_id];
  if (v.tp.empty()) {
    v.tp.assign(num_foreground_, 0);
    v.fp.assign(num_foreground_, 0);
    v.fn.assign(num_foreground_, 0);
    v.present.assign(num_foreground_, 0);
  }
  for (std::size_t i = 0; i < label.size(); ++i) {
    const std::size_t p = prediction[i], y = label[i];
    if (p > num_foreground_ || y > num_foreground_) {
      throw std::invalid_argument("VolumeScorer: class id outside 0.." + std::to_string(num_foreground_));
    }
    if (y > 0) ++v.present[y - 1];
    if (p == y) {
      if (y > 0) ++v.tp[y - 1];
      continue;
    }
    if (p > 0) ++v.fp[p - 1];
    if (y > 0) ++v.fn[y - 1];
  }
}

SegmentationScores VolumeScorer::result() const {
  SegmentationScores s;
  std::vector<double> dice_sum(num_foreground_, 0.0), ji_sum(num_foreground_, 0.0);
  std::vector<std::size_t> dice_n(num_foreground_, 0);
  double dice_total = 0.0, ji_total = 0.0;
  for (const auto& [id, v] : volumes_) {
    double vd = 0.0, vj = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < num_foreground_; ++c) {
      if (v.present[c] == 0) continue;
      const double tp = static_cast<double>(v.tp[c]), fp = static_cast<double>(v.fp[c]),
                   fn = static_cast<double>(v.fn[c]);
      const double dice = 2 * tp / (2 * tp + fp + fn);
      const double ji = tp / (tp + fp + fn);
      vd += dice;
      vj += ji;
      dice_sum[c] += dice;
      ji_sum[c] += ji;
      ++dice_n[c];
      ++classes;
    }
    if (classes == 0) continue;
    dice_total += vd / static_cast<double>(classes);
    ji_total += vj / static_cast<double>(classes);
    ++s.volumes;
  }
  s.dice.resize(num_foreground_);
  s.ji.resize(num_foreground_);
  for (std::size_t c = 0; c < num_foreground_; ++c) {
    s.dice[c] = dice_n[c] ? dice_sum[c] / static_cast<double>(dice_n[c]) : kMissing;
    s.ji[c] = dice_n[c] ? ji_sum[c] / static_cast<double>(dice_n[c]) : kMissing;
  }
  s.dice_mean = s.volumes ? dice_total / static_cast<double>(s.volumes) : kMissing;
  s.ji_mean = s.volumes ? ji_total / static_cast<double>(s.volumes) : kMissing;
  return s;
}

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_number(const std::string& field, std::size_t line) {
  if (field.empty()) return kMissing;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size()) {
    throw std::runtime_error("metrics line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string metrics_header(std::size_t num_foreground) {
  std::string h = "epoch,split,loss_gcl,loss_seg,loss_cons,loss_lcl,lambda3,dice_mean,ji_mean";
  for (std::size_t c = 1; c <= num_foreground; ++c) h += ",dice_c" + std::to_string(c);
  return h;
}

std::string format_metrics_row(const MetricsRow& r, std::size_t num_foreground) {
  if (r.split.find_first_of(",\n") != std::string::npos) {
    throw std::invalid_argument("metrics: split name contains a separator");
  }
  std::string line = std::to_string(r.epoch) + "," + r.split;
  for (double v : {r.loss_gcl, r.loss_seg, r.loss_cons, r.loss_lcl, r.lambda3, r.dice_mean, r.ji_mean}) {
    line += "," + number(v);
  }
  for (std::size_t c = 0; c < num_foreground; ++c) line += "," + number(c < r.dice.size() ? r.dice[c] : kMissing);
  return line;
}

void save_metrics(const MetricsReport& report, const std::string& path) {
  std::ostringstream out;
  out << metrics_header(report.num_foreground) << '\n';
  for (const auto& row : report.rows) out << format_metrics_row(row, report.num_foreground) << '\n';
  std::ofstream file(path, std::ios::binary);
  file << out.str();
  if (!file) throw std::runtime_error("metrics: cannot write '" + path + "'");
}

MetricsReport load_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("metrics: cannot read '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("metrics: '" + path + "' is empty");
  const auto columns = split_csv(header);
  if (columns.size() < 9) throw std::runtime_error("metrics: header has too few columns");
  MetricsReport report;
  report.num_foreground = columns.size() - 9;
  if (header != metrics_header(report.num_foreground)) {
    throw std::runtime_error("metrics: unexpected header '" + header + "'");
  }
  std::string line;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != columns.size()) {
      throw std::runtime_error("metrics line " + std::to_string(lineno) + ": expected " +
                               std::to_string(columns.size()) + " fields, got " + std::to_string(f.size()));
    }
    MetricsRow r;
    const double epoch = parse_number(f[0], lineno);
    if (!(epoch >= 0) || epoch != std::floor(epoch)) {
      throw std::runtime_error("metrics line " + std::to_string(lineno) + ": bad epoch '" + f[0] + "'");
    }
    r.epoch = static_cast<std::size_t>(epoch);
    r.split = f[1];
    r.loss_gcl = parse_number(f[2], lineno);
    r.loss_seg = parse_number(f[3], lineno);
    r.loss_cons = parse_number(f[4], lineno);
    r.loss_lcl = parse_number(f[5], lineno);
    r.lambda3 = parse_number(f[6], lineno);
    r.dice_mean = parse_number(f[7], lineno);
    r.ji_mean = parse_number(f[8], lineno);
    for (std::size_t c = 9; c < f.size(); ++c) r.dice.push_back(parse_number(f[c], lineno));
    report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace dcl::train
