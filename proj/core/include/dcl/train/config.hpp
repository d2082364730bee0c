#pragma once

// Flat `key = value` run configuration. Every field has exactly one key;
// `#` starts a comment; unknown keys and malformed values are errors.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcl/data/dataset.hpp"
#include "dcl/losses/objective.hpp"

namespace dcl::train {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PrecisionMode { kSingle, kDouble };

struct TrainConfig {
  // Paths
  std::string data_dir = "data";
  std::string out_dir = "run";
  std::string encoder_checkpoint = "";  // Stage II init; empty = random encoder
  std::string checkpoint = "";          // eval input; empty = <out_dir>/stage2.ckpt

  // Dataset generation and volume selection
  std::size_t volumes = 40;
  std::size_t labeled_volumes = 4;      // n
  std::size_t unlabeled_volumes = 28;   // m
  std::size_t val_volumes = 2;
  std::size_t test_volumes = 6;
  std::size_t depth = 16;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t organs = 3;
  double image_noise = 0.05;
  std::size_t distractors = 2;
  double bias_field = 0.1;

  // Stage I
  std::size_t stage1_epochs = 40;
  std::size_t stage1_batch = 32;  // B slices -> 2B views
  double stage1_lr = 0.02;
  double momentum = 0.9;
  double stage1_grad_clip = 1.0;  // global L2 gradient norm cap, 0 disables
  double threshold = 0.65;        // t

  // Stage II
  std::size_t stage2_epochs = 30;
  std::size_t stage2_batch = 8;
  std::size_t stage2_labeled_batch = 4;  // remainder is unlabeled
  double stage2_lr = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda1 = 0.01;
  double lambda2 = 1.0;
  double lambda3_peak = 0.1;
  std::size_t local_start_epoch = 9;  // 1-based; local loss off before it
  std::size_t bank_capacity = 64;     // Q
  double ema_alpha = 0.99;
  double tau = 0.1;
  double input_noise = 0.1;           // per-network input perturbation sigma

  // Evaluation
  bool eval_teacher = false;
  std::size_t eval_batch = 16;

  std::uint64_t seed = 0;
  PrecisionMode precision = PrecisionMode::kSingle;

  std::size_t stage2_unlabeled_batch() const { return stage2_batch - stage2_labeled_batch; }
  losses::LossWeights loss_weights() const;
  data::DatasetSpec dataset_spec() const;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// All keys in canonical order.
const std::vector<ConfigKey>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& config, const std::string& key);

// Applies `key = value` lines on top of `config`. `origin` names the source
// in diagnostics.
void apply_config_text(TrainConfig& config, const std::string& text, const std::string& origin = "config");
TrainConfig load_config_file(const std::string& path);

// Every key in canonical order, one `key = value` line each.
std::string canonical_config_text(const TrainConfig& config);
// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

std::string precision_name(PrecisionMode mode);

}  // namespace dcl::train
