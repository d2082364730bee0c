#include "dcl/train/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace dcl::train {

namespace {

struct Field {
  ConfigKey key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename Int>
Field integer(const char* name, const char* help, Int TrainConfig::*member) {
  return {{name, help},
          [name, member](TrainConfig& c, const std::string& v) { c.*member = parse_integer<Int>(name, v); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field real(const char* name, const char* help, double TrainConfig::*member) {
  return {{name, help},
          [name, member](TrainConfig& c, const std::string& v) { c.*member = parse_real(name, v); },
          [member](const TrainConfig& c) { return format_real(c.*member); }};
}

Field text(const char* name, const char* help, std::string TrainConfig::*member) {
  return {{name, help}, [member](TrainConfig& c, const std::string& v) { c.*member = v; },
          [member](const TrainConfig& c) { return c.*member; }};
}

Field boolean(const char* name, const char* help, bool TrainConfig::*member) {
  return {{name, help},
          [name, member](TrainConfig& c, const std::string& v) {
            if (v == "true" || v == "1") c.*member = true;
            else if (v == "false" || v == "0") c.*member = false;
            else throw ConfigError(std::string("config key '") + name + "': expected true or false, got '" + v + "'");
          },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      text("data_dir", "dataset directory (written by gen-data, read by training)", &TrainConfig::data_dir),
      text("out_dir", "output directory for checkpoints, metrics and run headers", &TrainConfig::out_dir),
      text("encoder_checkpoint", "Stage I checkpoint used to initialise Stage II; empty for a random encoder",
           &TrainConfig::encoder_checkpoint),
      text("checkpoint", "checkpoint evaluated by eval; empty means <out_dir>/stage2.ckpt", &TrainConfig::checkpoint),
      integer("volumes", "number of phantom volumes generated", &TrainConfig::volumes),
      integer("labeled_volumes", "labeled volumes n", &TrainConfig::labeled_volumes),
      integer("unlabeled_volumes", "unlabeled volumes m", &TrainConfig::unlabeled_volumes),
      integer("val_volumes", "validation volumes", &TrainConfig::val_volumes),
      integer("test_volumes", "test volumes", &TrainConfig::test_volumes),
      integer("depth", "slices per volume D", &TrainConfig::depth),
      integer("height", "slice height H", &TrainConfig::height),
      integer("width", "slice width W", &TrainConfig::width),
      integer("organs", "foreground organ classes C_fg", &TrainConfig::organs),
      real("image_noise", "Gaussian noise sigma of generated phantoms", &TrainConfig::image_noise),
      integer("distractors", "organ-like background blobs per phantom", &TrainConfig::distractors),
      real("bias_field", "amplitude of the phantom multiplicative bias field", &TrainConfig::bias_field),
      integer("stage1_epochs", "Stage I epochs", &TrainConfig::stage1_epochs),
      integer("stage1_batch", "Stage I slices per batch B (2B views)", &TrainConfig::stage1_batch),
      real("stage1_lr", "Stage I SGD learning rate", &TrainConfig::stage1_lr),
      real("momentum", "Stage I SGD momentum", &TrainConfig::momentum),
      real("stage1_grad_clip", "Stage I global gradient-norm cap (0 disables)", &TrainConfig::stage1_grad_clip),
      real("threshold", "slice similarity threshold t", &TrainConfig::threshold),
      integer("stage2_epochs", "Stage II epochs", &TrainConfig::stage2_epochs),
      integer("stage2_batch", "Stage II images per step (labeled + unlabeled)", &TrainConfig::stage2_batch),
      integer("stage2_labeled_batch", "labeled images per Stage II step", &TrainConfig::stage2_labeled_batch),
      real("stage2_lr", "Stage II Adam learning rate", &TrainConfig::stage2_lr),
      real("adam_beta1", "Adam first-moment decay", &TrainConfig::adam_beta1),
      real("adam_beta2", "Adam second-moment decay", &TrainConfig::adam_beta2),
      real("adam_eps", "Adam epsilon", &TrainConfig::adam_eps),
      real("lambda1", "local contrastive loss weight", &TrainConfig::lambda1),
      real("lambda2", "supervised Dice+CE weight", &TrainConfig::lambda2),
      real("lambda3_peak", "peak of the consistency warm-up weight", &TrainConfig::lambda3_peak),
      integer("local_start_epoch", "first Stage II epoch (1-based) using the local contrastive loss",
              &TrainConfig::local_start_epoch),
      integer("bank_capacity", "memory bank capacity Q per class", &TrainConfig::bank_capacity),
      real("ema_alpha", "teacher EMA decay", &TrainConfig::ema_alpha),
      real("tau", "contrastive temperature", &TrainConfig::tau),
      real("input_noise", "Gaussian input perturbation sigma for student and teacher", &TrainConfig::input_noise),
      boolean("eval_teacher", "evaluate teacher instead of student weights", &TrainConfig::eval_teacher),
      integer("eval_batch", "slices per inference batch", &TrainConfig::eval_batch),
      integer("seed", "random seed", &TrainConfig::seed),
      {{"precision", "single or double"},
       [](TrainConfig& c, const std::string& v) {
         if (v == "single") c.precision = PrecisionMode::kSingle;
         else if (v == "double") c.precision = PrecisionMode::kDouble;
         else throw ConfigError("config key 'precision': expected single or double, got '" + v + "'");
       },
       [](const TrainConfig& c) { return precision_name(c.precision); }},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key.name == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::string precision_name(PrecisionMode mode) { return mode == PrecisionMode::kSingle ? "single" : "double"; }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, value);
}

std::string get_config_value(const TrainConfig& config, const std::string& key) { return field(key).get(config); }

void apply_config_text(TrainConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig config;
  apply_config_text(config, ss.str(), path);
  return config;
}

std::string canonical_config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + " = " + f.get(config) + "\n";
  return out;
}

std::string config_hash(const TrainConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

losses::LossWeights TrainConfig::loss_weights() const {
  losses::LossWeights w;
  w.lambda1 = lambda1;
  w.lambda2 = lambda2;
  w.lambda3_peak = lambda3_peak;
  w.threshold = threshold;
  w.tau = tau;
  return w;
}

data::DatasetSpec TrainConfig::dataset_spec() const {
  data::DatasetSpec s;
  s.phantom.depth = depth;
  s.phantom.height = height;
  s.phantom.width = width;
  s.phantom.organs = organs;
  s.phantom.noise_sigma = image_noise;
  s.phantom.distractors = distractors;
  s.phantom.bias_field = bias_field;
  s.volume_count = volumes;
  s.labeled = labeled_volumes;
  s.unlabeled = unlabeled_volumes;
  s.val = val_volumes;
  s.test = test_volumes;
  s.seed = seed;
  return s;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(labeled_volumes >= 1, "labeled_volumes must be >= 1");
  require(labeled_volumes + unlabeled_volumes + val_volumes + test_volumes <= volumes,
          "labeled + unlabeled + val + test volumes exceed volumes");
  require(depth >= 4, "depth must be >= 4");
  require(height % 8 == 0 && width % 8 == 0 && height >= 8 && width >= 8,
          "height and width must be positive multiples of 8");
  require(organs >= 1 && organs < 255, "organs must be in [1, 254]");
  require(image_noise >= 0.0 && bias_field >= 0.0, "image_noise and bias_field must be >= 0");
  require(stage1_epochs >= 1 && stage2_epochs >= 1, "epoch counts must be >= 1");
  require(stage1_batch >= 1, "stage1_batch must be >= 1");
  require(stage1_lr > 0.0 && stage2_lr > 0.0, "learning rates must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(stage1_grad_clip >= 0.0, "stage1_grad_clip must be >= 0");
  require(stage2_labeled_batch >= 1 && stage2_labeled_batch <= stage2_batch,
          "stage2_labeled_batch must lie in [1, stage2_batch]");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(local_start_epoch >= 1, "local_start_epoch must be >= 1");
  require(bank_capacity >= 1, "bank_capacity must be >= 1");
  require(ema_alpha > 0.0 && ema_alpha < 1.0, "ema_alpha must lie in (0, 1)");
  require(input_noise >= 0.0, "input_noise must be >= 0");
  require(eval_batch >= 1, "eval_batch must be >= 1");
  try {
    loss_weights().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

}  // namespace dcl::train
