#include "dcl/tools/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "dcl/data/dataset.hpp"
#include "dcl/data/raster.hpp"
#include "dcl/nets/checkpoint.hpp"
#include "dcl/train/config.hpp"
#include "dcl/train/gradient_suite.hpp"
#include "dcl/train/metrics.hpp"
#include "dcl/train/trainer.hpp"

namespace dcl::tools {

namespace {

namespace fs = std::filesystem;
using train::TrainConfig;

// `--config FILE` plus one `--<key> VALUE` option per configuration key.
class ConfigOptions {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", path_, "Configuration file of key = value lines");
    for (const auto& key : train::config_keys()) {
      app.add_option("--" + key.name, values_[key.name], key.help)->group("Configuration overrides");
    }
    app_ = &app;
  }

  TrainConfig resolve() const {
    TrainConfig config = path_.empty() ? TrainConfig{} : train::load_config_file(path_);
    for (const auto& [name, value] : values_) {
      if (app_->count("--" + name) > 0) train::set_config_value(config, name, value);
    }
    config.validate();
    return config;
  }

 private:
  std::string path_;
  std::map<std::string, std::string> values_;
  const CLI::App* app_ = nullptr;
};

std::string run_header(const std::string& command, const TrainConfig& config) {
  std::string h = "command = " + command + "\n";
  h += "config_hash = " + train::config_hash(config) + "\n";
  h += "seed = " + std::to_string(config.seed) + "\n";
  h += "precision = " + train::precision_name(config.precision) + "\n";
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  file << text;
  if (!file) throw std::runtime_error("cannot write '" + path.string() + "'");
}

// Writes <dir>/<command>.header.txt: header lines, a blank line, then the
// resolved configuration.
void write_run_header(const fs::path& dir, const std::string& command, const TrainConfig& config,
                      std::ostream& out) {
  fs::create_directories(dir);
  const auto header = run_header(command, config);
  write_text(dir / (command + ".header.txt"), header + "\n" + train::canonical_config_text(config));
  out << header;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report_time(std::ostream& err, const std::string& what, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", seconds);
  err << what << ": " << buf << " s\n";
}

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- subcommands ------------------------------------------------------------

int gen_data(const TrainConfig& config, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  data::generate_dataset(config.dataset_spec(), config.data_dir);
  write_run_header(config.data_dir, "gen-data", config, out);
  out << "wrote " << config.volumes << " volumes to " << config.data_dir << "\n";
  report_time(err, "gen-data", clock.seconds());
  return kExitOk;
}

template <typename T>
int pretrain(const TrainConfig& config, std::ostream& out, std::ostream& err) {
  const auto dataset = data::load_dataset(config.data_dir);
  const auto data = train::select_training_data(dataset, config);
  const fs::path dir = config.out_dir;
  write_run_header(dir, "pretrain", config, out);
  const auto result = train::pretrain_stage1<T>(config, data);
  nets::write_checkpoint((dir / "stage1.ckpt").string(), result.params);
  train::save_metrics(result.report, (dir / "stage1_metrics.csv").string());
  const auto& last = result.report.rows.back();
  out << "stage1: " << result.steps << " steps, final loss_gcl " << fixed(last.loss_gcl, 6) << "\n";
  report_time(err, "stage1", result.report.seconds.at("stage1"));
  return kExitOk;
}

template <typename T>
int train_cmd(const TrainConfig& config, std::ostream& out, std::ostream& err) {
  const auto dataset = data::load_dataset(config.data_dir);
  const auto data = train::select_training_data(dataset, config);
  const fs::path dir = config.out_dir;
  nets::ModelParams<T> encoder;
  if (!config.encoder_checkpoint.empty()) {
    encoder = nets::read_checkpoint<T>(config.encoder_checkpoint).subtree(nets::kEncoderPrefix);
  }
  write_run_header(dir, "train", config, out);
  const auto result =
      train::train_stage2<T>(config, data, config.encoder_checkpoint.empty() ? nullptr : &encoder);
  nets::write_pair_checkpoint((dir / "stage2.ckpt").string(), result.pair);
  train::save_metrics(result.report, (dir / "stage2_metrics.csv").string());
  const auto& last = result.report.rows.back();
  out << "stage2: " << result.steps << " steps, val dice_mean " << fixed(last.dice_mean) << "\n";
  report_time(err, "stage2", result.report.seconds.at("stage2"));
  return kExitOk;
}

template <typename T>
int eval_cmd(const TrainConfig& config, const std::string& split, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  const auto dataset = data::load_dataset(config.data_dir);
  const auto data = train::select_training_data(dataset, config);
  const fs::path dir = config.out_dir;
  const std::string checkpoint =
      config.checkpoint.empty() ? (dir / "stage2.ckpt").string() : config.checkpoint;
  const auto pair = nets::read_pair_checkpoint<T>(checkpoint);
  const auto& slices = split == "val" ? data.val : data.test;
  if (slices.empty()) throw std::runtime_error("dataset has no " + split + " slices");
  write_run_header(dir, "eval", config, out);

  const auto scores =
      train::evaluate(config.eval_teacher ? pair.teacher : pair.student, slices, data.num_foreground, config.eval_batch);
  train::MetricsReport report;
  report.num_foreground = data.num_foreground;
  train::MetricsRow row;
  row.split = split;
  row.dice_mean = scores.dice_mean;
  row.ji_mean = scores.ji_mean;
  row.dice = scores.dice;
  report.rows.push_back(row);
  train::save_metrics(report, (dir / "eval_metrics.csv").string());

  out << split << " (" << scores.volumes << " volumes, " << (config.eval_teacher ? "teacher" : "student")
      << "): dice_mean " << fixed(scores.dice_mean) << " ji_mean " << fixed(scores.ji_mean) << "\n";
  for (std::size_t c = 0; c < scores.dice.size(); ++c) {
    out << "  class " << c + 1 << ": dice " << fixed(scores.dice[c]) << " ji " << fixed(scores.ji[c]) << "\n";
  }
  report_time(err, "eval", clock.seconds());
  return kExitOk;
}

int gradcheck(std::uint64_t seed, std::size_t fixtures, const std::vector<std::string>& suites, std::ostream& out,
              std::ostream& err) {
  Stopwatch clock;
  out << "gradcheck seed = " << seed << ", precision = double, tolerance = " << train::kGradientTolerance << "\n";
  const auto cases = train::run_gradient_suite(seed, fixtures, suites);
  bool ok = true;
  for (const auto& c : cases) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", c.max_rel_error);
    out << (c.passed ? "PASS " : "FAIL ") << c.suite << " fixture " << c.fixture << ": max rel err " << buf << " over "
        << c.checked << " coords";
    if (c.skipped_kinks) out << " (" << c.skipped_kinks << " non-smooth coords skipped)";
    if (!c.passed) out << ", worst " << c.worst;
    out << "\n";
    ok = ok && c.passed;
  }
  report_time(err, "gradcheck", clock.seconds());
  return ok ? kExitOk : kExitNumeric;
}

template <typename Fn>
int dispatch_precision(const TrainConfig& config, Fn&& fn) {
  return config.precision == train::PrecisionMode::kDouble ? fn(double{}) : fn(float{});
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-contrastive semi-supervised segmentation on synthetic phantoms", "dcl"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a phantom dataset into data_dir");
  ConfigOptions gen_opts;
  gen_opts.attach(*gen);

  auto* pre = app.add_subcommand("pretrain", "Stage I: global contrastive pretraining of the encoder");
  ConfigOptions pre_opts;
  pre_opts.attach(*pre);

  auto* trn = app.add_subcommand("train", "Stage II: mean-teacher training with the local contrastive loss");
  ConfigOptions trn_opts;
  trn_opts.attach(*trn);

  auto* evl = app.add_subcommand("eval", "Score a Stage II checkpoint on the val or test split");
  ConfigOptions evl_opts;
  evl_opts.attach(*evl);
  std::string split = "test";
  evl->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"val", "test"}));

  auto* grd = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every loss and the network");
  std::uint64_t grad_seed = 0;
  std::size_t grad_fixtures = 3;
  std::vector<std::string> grad_suites;
  grd->add_option("--seed", grad_seed, "Fixture seed");
  grd->add_option("--fixtures", grad_fixtures, "Random fixtures per suite")->check(CLI::PositiveNumber);
  grd->add_option("--suite", grad_suites, "Restrict to these suites (repeatable)")
      ->check(CLI::IsMember(train::gradient_suite_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return gen_data(gen_opts.resolve(), out, err);
    if (pre->parsed()) {
      const auto config = pre_opts.resolve();
      return dispatch_precision(config, [&](auto tag) { return pretrain<decltype(tag)>(config, out, err); });
    }
    if (trn->parsed()) {
      const auto config = trn_opts.resolve();
      return dispatch_precision(config, [&](auto tag) { return train_cmd<decltype(tag)>(config, out, err); });
    }
    if (evl->parsed()) {
      const auto config = evl_opts.resolve();
      return dispatch_precision(config, [&](auto tag) { return eval_cmd<decltype(tag)>(config, split, out, err); });
    }
    return gradcheck(grad_seed, grad_fixtures, grad_suites, out, err);
  } catch (const train::ConfigError& e) {
    err << "dcl: " << e.what() << "\n";
    return kExitUsage;
  } catch (const train::NumericError& e) {
    err << "dcl: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    err << "dcl: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "dcl: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace dcl::tools
