// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dcl/data/dataset.hpp"
#include "dcl/losses/contrastive.hpp"
#include "dcl/losses/memory_bank.hpp"
#include "dcl/losses/objective.hpp"
#include "dcl/losses/segmentation.hpp"
#include "dcl/ops.hpp"
#include "dcl/train/config.hpp"
#include "dcl/train/gradient_suite.hpp"
#include "dcl/train/trainer.hpp"
#include "scalar_oracles.hpp"

namespace fs = std::filesystem;
using namespace dcl;

namespace {

using Clock = std::chrono::steady_clock;
using Rng = std::mt19937_64;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double v, const char* fmt = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor<double> uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = u(rng);
  return t;
}

std::vector<std::uint8_t> class_mask(std::size_t n, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(classes) - 1);
  std::vector<std::uint8_t> m(n);
  for (auto& v : m) v = static_cast<std::uint8_t>(u(rng));
  return m;
}

// Two views per slice, positions k / 15.
std::vector<double> view_positions(std::size_t B, Rng& rng) {
  std::uniform_int_distribution<int> k(0, 15);
  std::vector<double> p;
  for (std::size_t b = 0; b < B; ++b) {
    const double v = k(rng) / 15.0;
    p.insert(p.end(), {v, v});
  }
  return p;
}

std::vector<std::vector<std::vector<double>>> bank_lists(const losses::MemoryBank& bank) {
  std::vector<std::vector<std::vector<double>>> out;
  for (std::size_t c = 1; c <= bank.num_foreground(); ++c) out.emplace_back(bank.buffer(c).begin(), bank.buffer(c).end());
  return out;
}

// Small on-disk dataset shared by the training-loop criteria.
train::TrainConfig tiny_config(const fs::path& dir) {
  train::TrainConfig c;
  c.data_dir = (dir / "data").string();
  c.out_dir = (dir / "run").string();
  c.volumes = 5;
  c.labeled_volumes = 1;
  c.unlabeled_volumes = 2;
  c.val_volumes = 1;
  c.test_volumes = 1;
  c.depth = 4;
  c.height = c.width = 16;
  c.stage1_epochs = 2;
  c.stage1_batch = 4;
  c.stage2_epochs = 2;
  c.stage2_batch = 4;
  c.stage2_labeled_batch = 2;
  c.local_start_epoch = 2;
  c.bank_capacity = 8;
  c.seed = 11;
  c.precision = train::PrecisionMode::kDouble;
  return c;
}

void ensure_dataset(const train::TrainConfig& c) {
  if (!fs::exists(fs::path(c.data_dir) / data::kManifestName)) data::generate_dataset(c.dataset_spec(), c.data_dir);
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto cases = train::run_gradient_suite(0, 3);
  const double secs = seconds_since(start);
  std::set<std::string> suites;
  double worst = 0;
  std::size_t failed = 0;
  for (const auto& c : cases) {
    suites.insert(c.suite);
    worst = std::max(worst, c.max_rel_error);
    if (!c.passed) ++failed;
  }
  Outcome o;
  o.passed = failed == 0 && suites.size() == 5 && cases.size() == 15 && secs <= 120.0;
  o.detail = std::to_string(cases.size()) + " fixtures over " + std::to_string(suites.size()) +
             " suites, max rel err " + num(worst) + " (tol 1e-6), " + std::to_string(failed) + " failed, " +
             num(secs, "%.1f") + " s (limit 120 s)";
  return o;
}

// ---- 2 ----------------------------------------------------------------------

Outcome oracle_equivalence() {
  Rng rng(2024);
  const int kFixtures = 20;
  double worst_sim = 0, worst_gcl = 0, worst_centers = 0, worst_lcl = 0, worst_dice = 0, worst_cons = 0;
  bool presence_ok = true;

  for (int f = 0; f < kFixtures; ++f) {
    const std::size_t B = 1 + f % 4, n = 2 * B, d = 8;
    const auto pos = view_positions(B, rng);
    const auto s = data::similarity_matrix(pos);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        worst_sim = std::max(worst_sim, std::abs(s.values()[i * n + j] - oracle::similarity(pos[i], pos[j])));

    Tensor<double> z;
    {
      NoGradGuard no_grad;
      z = l2_normalize(uniform({n, d}, rng), 1);
    }
    const double got = losses::gcl_loss(z, s, 0.65, 0.1).item();
    worst_gcl = std::max(worst_gcl, std::abs(got - oracle::gcl(values(z), n, d, s.values(), 0.65, 0.1)));
  }

  for (int f = 0; f < kFixtures; ++f) {
    const std::size_t N = 1 + f % 4, K = 8, H = 4 * (1 + f % 4), C = 1 + f % 3;
    const auto proj = uniform({N, K, H, H}, rng);
    const auto mask = class_mask(N * H * H, C + 1, rng);
    const auto got = losses::mask_centers(proj, mask, C);
    const auto want = oracle::mask_centers(values(proj), N, K, H, H, mask, C);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 1; c <= C; ++c) {
        const bool present = got[i].present(c);
        if (present != want[i][c - 1].has_value()) {
          presence_ok = false;
          continue;
        }
        if (present) worst_centers = std::max(worst_centers, max_abs_diff(values(got[i].center(c)), *want[i][c - 1]));
      }
    }
  }

  for (int f = 0; f < kFixtures; ++f) {
    const std::size_t C = 1 + f % 3, K = 8, H = 8;
    losses::MemoryBank bank(C, K, 8);
    std::normal_distribution<double> g;
    for (std::size_t c = 1; c <= C; ++c) {
      for (std::size_t i = 0; i < 1 + static_cast<std::size_t>(f) % 4; ++i) {
        losses::MemoryBank::Vector v(K);
        for (auto& x : v) x = g(rng);
        bank.push(c, v);
      }
    }
    const auto proj = uniform({1, K, H, H}, rng);
    const auto mask = class_mask(H * H, C + 1, rng);
    const auto centers = losses::mask_centers(proj, mask, C)[0];
    std::vector<std::optional<std::vector<double>>> oc;
    for (std::size_t c = 1; c <= C; ++c) {
      if (centers.present(c)) oc.emplace_back(values(centers.center(c)));
      else oc.emplace_back();
    }
    worst_lcl = std::max(worst_lcl, std::abs(losses::lcl_loss(centers, bank, 0.1).item() -
                                             oracle::lcl(oc, bank_lists(bank), 0.1)));
  }

  for (int f = 0; f < kFixtures; ++f) {
    const std::size_t N = 1 + f % 4, C = 2 + f % 3, H = 4 * (1 + f % 4);
    const auto logits = uniform({N, C, H, H}, rng, -3, 3);
    const auto labels = class_mask(N * H * H, C, rng);
    worst_dice = std::max(worst_dice, std::abs(losses::dice_ce_loss(logits, labels).total.item() -
                                               oracle::dice_ce(values(logits), N, C, H, H, labels)));

    NoGradGuard no_grad;
    const auto qs = softmax_channels(uniform({N, C, H, H}, rng, -3, 3));
    const auto qt = softmax_channels(uniform({N, C, H, H}, rng, -3, 3));
    worst_cons = std::max(worst_cons,
                          std::abs(losses::consistency_loss(qs, qt).item() - oracle::consistency(values(qs), values(qt))));
  }

  losses::MemoryBank hand_bank(2, 2, 4);
  hand_bank.push(1, {1.0, 0.0});
  hand_bank.push(2, {0.0, 1.0});
  losses::MaskCenterSet<double> hand;
  hand.centers = {Tensor<double>({2}, std::vector<double>{1.0, 0.0}), std::nullopt};
  hand.counts = {1, 0};
  const double hand_value = losses::lcl_loss(hand, hand_bank, 1.0).item();
  const double hand_err = std::abs(hand_value - std::log1p(std::exp(-1.0)));

  const double worst = std::max({worst_sim, worst_gcl, worst_centers, worst_lcl, worst_dice, worst_cons});
  Outcome o;
  o.passed = presence_ok && worst <= 1e-6 && hand_err <= 1e-6;
  o.detail = "20 fixtures each; max abs diff similarity " + num(worst_sim) + ", gcl " + num(worst_gcl) +
             ", mask_centers " + num(worst_centers) + ", lcl " + num(worst_lcl) + ", dice_ce " + num(worst_dice) +
             ", consistency " + num(worst_cons) + " (tol 1e-6); lcl hand fixture " + num(hand_value, "%.6f") +
             " vs log(1+e^-1), diff " + num(hand_err) + (presence_ok ? "" : "; class presence mismatch");
  return o;
}

// ---- 3 ----------------------------------------------------------------------

Outcome schedule_check() {
  const double at_end = losses::lambda3(1000, 1000);
  const double at_zero = losses::lambda3(0, 1000);
  const double zero_err = std::abs(at_zero - 0.1 * std::exp(-5.0));
  bool monotone = true;
  double prev = -INFINITY;
  for (int i = 0; i <= 1000; ++i) {
    const double v = losses::lambda3(i, 1000);
    if (!(v > prev)) monotone = false;
    prev = v;
  }
  Outcome o;
  o.passed = at_end == 0.1 && zero_err <= 1e-12 && monotone;
  o.detail = "lambda3(max) = " + num(at_end, "%.17g") + ", |lambda3(0) - 0.1e^-5| = " + num(zero_err) +
             ", strictly increasing on 1001 points: " + (monotone ? "yes" : "no");
  return o;
}

// ---- 4 ----------------------------------------------------------------------

Outcome bank_semantics() {
  train::TrainConfig defaults;
  train::TrainConfig preset;
  train::apply_config_text(preset, "bank_capacity = 256\n");
  preset.validate();

  bool all_equal = true;
  std::string sizes;
  Rng rng(4);
  for (std::size_t Q : {defaults.bank_capacity, preset.bank_capacity}) {
    const std::size_t C = 3, K = 6;
    losses::MemoryBank bank(C, K, Q);
    oracle::ListBank ref(C, Q);
    std::bernoulli_distribution present(0.92);
    std::normal_distribution<double> g;
    for (std::size_t step = 0; step < Q + 50; ++step) {
      losses::MaskCenterSet<double> set;
      set.centers.resize(C);
      set.counts.assign(C, 0);
      for (std::size_t c = 1; c <= C; ++c) {
        if (!present(rng)) continue;
        std::vector<double> v(K);
        for (auto& x : v) x = g(rng);
        set.centers[c - 1] = Tensor<double>({K}, v);
        set.counts[c - 1] = 1;
        ref.push(c, v);
      }
      losses::bank_push(bank, set);
    }
    for (std::size_t c = 1; c <= C; ++c) {
      const auto& buf = bank.buffer(c);
      const auto& want = ref.lists[c - 1];
      if (buf.size() != want.size() || !std::equal(buf.begin(), buf.end(), want.begin())) all_equal = false;
    }
    sizes += (sizes.empty() ? "" : ", ") + std::string("Q=") + std::to_string(Q) + " sizes " +
             std::to_string(bank.size(1)) + "/" + std::to_string(bank.size(2)) + "/" + std::to_string(bank.size(3));
  }
  Outcome o;
  o.passed = all_equal && defaults.bank_capacity == 64 && preset.bank_capacity == 256;
  o.detail = "Q+50 random pushes vs list oracle: " + std::string(all_equal ? "identical" : "MISMATCH") + " (" + sizes +
             "); config default Q=" + std::to_string(defaults.bank_capacity) + ", preset 256 accepted";
  return o;
}

// ---- 5 ----------------------------------------------------------------------

Outcome ema_replay(const fs::path& work) {
  auto config = tiny_config(work / "ema");
  ensure_dataset(config);
  const auto dataset = data::load_dataset(config.data_dir);
  const auto data = train::select_training_data(dataset, config);

  std::vector<nets::ModelParams<double>> students, teachers;
  bool teacher_grad_seen = false;
  train::train_stage2<double>(config, data, nullptr,
                              [&](const train::Stage2StepInfo&, const nets::TeacherStudentPair<double>& pair,
                                  const losses::MemoryBank&) {
                                students.push_back(pair.student.clone(false));
                                teachers.push_back(pair.teacher.clone(false));
                                for (const auto& [name, t] : pair.teacher) {
                                  if (t.requires_grad() || t.has_grad()) teacher_grad_seen = true;
                                }
                              });

  const double alpha = config.ema_alpha;
  auto replay = train::initial_stage2_pair<double>(config, nullptr).teacher.clone(false);
  double worst = 0;
  const std::size_t steps = std::min<std::size_t>(3, students.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (auto& [name, t] : replay) {
      auto w = t.mutable_data();
      const auto s = students[k].at(name).data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = alpha * w[i] + (1.0 - alpha) * s[i];
      worst = std::max(worst, max_abs_diff(values(t), values(teachers[k].at(name))));
    }
  }
  Outcome o;
  o.passed = steps == 3 && worst <= 1e-6 && !teacher_grad_seen;
  o.detail = std::to_string(steps) + " logged steps, max |teacher - EMA replay| " + num(worst) +
             " (tol 1e-6), teacher gradients " + (teacher_grad_seen ? "PRESENT" : "absent at every step");
  return o;
}

// ---- 6 ----------------------------------------------------------------------

Outcome degeneration(const fs::path& work) {
  auto config = tiny_config(work / "degenerate");
  config.unlabeled_volumes = 0;
  config.stage2_batch = config.stage2_labeled_batch;
  config.lambda3_peak = 0.0;
  config.local_start_epoch = config.stage2_epochs + 1;
  config.volumes = 3;
  config.val_volumes = 1;
  config.test_volumes = 1;
  ensure_dataset(config);
  const auto dataset = data::load_dataset(config.data_dir);
  const auto data = train::select_training_data(dataset, config);

  std::vector<double> logged_loss;
  std::vector<nets::ModelParams<double>> logged_params;
  train::train_stage2<double>(config, data, nullptr,
                              [&](const train::Stage2StepInfo& info, const nets::TeacherStudentPair<double>& pair,
                                  const losses::MemoryBank&) {
                                logged_loss.push_back(info.total);
                                logged_params.push_back(pair.student.clone(false));
                              });

  // Reference: plain Dice + CE with a hand-written Adam on the same draws.
  auto params = train::initial_stage2_pair<double>(config, nullptr).student.clone(true);
  train::Stage2Streams streams(config.seed);
  std::map<std::string, std::vector<double>> m, v;
  double worst_loss = 0, worst_param = 0;
  const std::size_t steps = std::min<std::size_t>(3, logged_loss.size());
  for (std::size_t step = 1; step <= steps; ++step) {
    const auto idx = streams.sample(data.labeled.size(), config.stage2_labeled_batch);
    std::vector<const Tensor<float>*> images;
    std::vector<std::uint8_t> labels;
    for (std::size_t i : idx) {
      images.push_back(&data.labeled[i]->image);
      labels.insert(labels.end(), data.labeled[i]->label->begin(), data.labeled[i]->label->end());
    }
    const auto x = streams.student_view(train::stack_images<double>(images), config.input_noise);
    const auto logits = nets::decoder_forward(params, nets::encoder_forward(params, x)).logits;
    const auto loss = losses::dice_ce_loss(logits, labels).total;
    backward(loss);
    const double b1 = config.adam_beta1, b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step)), c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      auto& mm = m[name];
      auto& vv = v[name];
      mm.resize(t.numel(), 0.0);
      vv.resize(t.numel(), 0.0);
      const auto g = t.grad();
      auto w = t.mutable_data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        mm[i] = b1 * mm[i] + (1 - b1) * g[i];
        vv[i] = b2 * vv[i] + (1 - b2) * g[i] * g[i];
        w[i] -= config.stage2_lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + config.adam_eps);
      }
    }
    params.zero_grad();
    worst_loss = std::max(worst_loss, std::abs(loss.item() - logged_loss[step - 1]));
    for (const auto& [name, t] : params) {
      worst_param = std::max(worst_param, max_abs_diff(values(t), values(logged_params[step - 1].at(name))));
    }
  }
  Outcome o;
  o.passed = steps == 3 && worst_loss <= 1e-6 && worst_param <= 1e-6;
  o.detail = std::to_string(steps) + " steps, max |loss diff| " + num(worst_loss) + ", max |param diff| " +
             num(worst_param) + " (tol 1e-6)";
  return o;
}

// ---- 7 ----------------------------------------------------------------------

struct Variant {
  const char* name;
  bool unlabeled;
  bool pretrained;
  bool local;
};

const Variant kVariants[] = {
    {"supervised", false, false, false},
    {"mean-teacher", true, false, false},
    {"mean-teacher+gcl", true, true, false},
    {"full", true, true, true},
};

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome ablation(const fs::path& work, std::size_t side) {
  const auto start = Clock::now();
  const std::size_t kSeeds = 3;
  std::vector<std::vector<double>> dice(std::size(kVariants));
  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    train::TrainConfig base;
    base.height = base.width = side;
    base.seed = seed;
    base.data_dir = (work / "ablation" / ("data_s" + std::to_string(seed))).string();
    ensure_dataset(base);
    const auto dataset = data::load_dataset(base.data_dir);
    const auto data = train::select_training_data(dataset, base);
    const auto stage1 = train::pretrain_stage1<float>(base, data);
    const auto encoder = stage1.params.subtree(nets::kEncoderPrefix);

    for (std::size_t vi = 0; vi < std::size(kVariants); ++vi) {
      const auto& variant = kVariants[vi];
      auto config = base;
      auto run_data = data;
      if (!variant.unlabeled) {
        config.unlabeled_volumes = 0;
        config.stage2_batch = config.stage2_labeled_batch;
        config.lambda3_peak = 0.0;
        run_data.unlabeled.clear();
      }
      if (!variant.local) config.local_start_epoch = config.stage2_epochs + 1;
      const auto result = train::train_stage2<float>(config, run_data, variant.pretrained ? &encoder : nullptr);
      const auto scores = train::evaluate(result.pair.student, data.test, data.num_foreground, config.eval_batch);
      dice[vi].push_back(scores.dice_mean);
      std::cout << "  seed " << seed << " " << variant.name << ": test dice " << num(scores.dice_mean, "%.4f")
                << " (" << num(seconds_since(start) / 60.0, "%.1f") << " min elapsed)\n"
                << std::flush;
    }
  }
  std::vector<double> med;
  for (const auto& d : dice) med.push_back(median3(d));
  const double sup = med[0], mt = med[1], gcl = med[2], full = med[3];
  const double minutes = seconds_since(start) / 60.0;
  const bool order = full - gcl >= 0.01 && gcl - mt >= 0.01 && full - sup >= 0.02;
  Outcome o;
  o.passed = order && minutes <= 45.0;
  o.detail = std::to_string(side) + "x" + std::to_string(side) + " phantoms, median test dice over 3 seeds: full " +
             num(full, "%.4f") + ", MT+gcl " + num(gcl, "%.4f") + ", MT " + num(mt, "%.4f") + ", supervised " +
             num(sup, "%.4f") + "; gaps full-MT+gcl " + num(full - gcl, "%+.4f") + ", MT+gcl-MT " +
             num(gcl - mt, "%+.4f") + " (need >= 0.01), full-supervised " + num(full - sup, "%+.4f") +
             " (need >= 0.02); " + num(minutes, "%.1f") + " min (limit 45)";
  return o;
}

// ---- 8 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism(const fs::path& work, const std::string& cli) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto base = tiny_config(dir);
  std::string common = " --data_dir '" + base.data_dir + "' --volumes 5 --labeled_volumes 1 --unlabeled_volumes 2"
                       " --val_volumes 1 --test_volumes 1 --depth 4 --height 16 --width 16 --stage1_epochs 2"
                       " --stage1_batch 4 --stage2_epochs 2 --stage2_batch 4 --stage2_labeled_batch 2"
                       " --local_start_epoch 2 --bank_capacity 8 --seed 11";
  auto run = [&](const std::string& sub, const std::string& extra) {
    const std::string line = "'" + cli + "' " + sub + common + extra + " >> '" + (dir / "cli.log").string() + "' 2>&1";
    return std::system(line.c_str());
  };
  if (run("gen-data", "") != 0) return {false, "gen-data failed; see " + (dir / "cli.log").string()};
  const std::vector<std::string> outs = {"a", "b"};
  for (const auto& out : outs) {
    const std::string o = " --out_dir '" + (dir / out).string() + "'";
    if (run("pretrain", o) != 0 ||
        run("train", o + " --encoder_checkpoint '" + (dir / out / "stage1.ckpt").string() + "'") != 0 ||
        run("eval", o) != 0) {
      return {false, "CLI run failed; see " + (dir / "cli.log").string()};
    }
  }
  std::size_t identical = 0;
  std::string mismatched;
  for (const char* f : {"stage1_metrics.csv", "stage2_metrics.csv", "eval_metrics.csv"}) {
    const auto a = slurp(dir / "a" / f);
    if (!a.empty() && a == slurp(dir / "b" / f)) ++identical;
    else mismatched += std::string(" ") + f;
  }
  Outcome o;
  o.passed = identical == 3;
  o.detail = "pretrain/train/eval run twice: " + std::to_string(identical) + "/3 metrics CSVs byte-identical" +
             (mismatched.empty() ? "" : "; differing:" + mismatched);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string workdir = (fs::temp_directory_path() / "dcl_acceptance").string();
  std::size_t side = 32;
  std::string cli = DCL_CLI_PATH;
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--workdir", workdir, "Scratch directory for datasets and runs");
  app.add_option("--ablation-size", side, "Slice side length of the ablation phantoms")->check(CLI::PositiveNumber);
  app.add_option("--cli", cli, "Path of the dcl executable");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = workdir;
  fs::create_directories(work);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"oracle equivalence", oracle_equivalence},
      {"lambda3 schedule", schedule_check},
      {"memory bank semantics", bank_semantics},
      {"EMA replay", [&] { return ema_replay(work); }},
      {"degeneration to supervised", [&] { return degeneration(work); }},
      {"ablation direction", [&] { return ablation(work, side); }},
      {"CLI determinism", [&] { return cli_determinism(work, cli); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::cout << (o.passed ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << "\n"
              << std::flush;
  }
  return failures == 0 ? 0 : 1;
}
