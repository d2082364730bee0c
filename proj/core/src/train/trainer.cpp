#include "dcl/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "dcl/data/augment.hpp"
#include "dcl/losses/contrastive.hpp"
#include "dcl/losses/objective.hpp"
#include "dcl/losses/segmentation.hpp"
#include "dcl/ops.hpp"
#include "dcl/train/optim.hpp"

namespace dcl::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Decorrelates the streams derived from one user seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return data::volume_seed(seed, static_cast<std::size_t>(stream));
}

template <typename T>
Tensor<T> batch_range(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  if (begin == 0 && count == x.dim(0)) return x;
  const std::size_t per = x.numel() / x.dim(0);
  std::vector<std::size_t> flat(count * per);
  std::iota(flat.begin(), flat.end(), begin * per);
  Shape shape = x.shape();
  shape[0] = count;
  return index_select(x, flat, std::move(shape));
}

template <typename T>
void require_finite(const Tensor<T>& loss, const char* what, std::size_t epoch) {
  if (!std::isfinite(static_cast<double>(loss.item()))) {
    throw NumericError(std::string(what) + " became non-finite in epoch " + std::to_string(epoch));
  }
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TrainingData select_training_data(const data::Dataset& dataset, const TrainConfig& config) {
  if (dataset.num_classes != config.organs + 1) {
    throw ConfigError("dataset has " + std::to_string(dataset.num_classes - 1) + " organ classes, config expects " +
                      std::to_string(config.organs));
  }
  TrainingData out;
  out.num_foreground = config.organs;

  auto take_volumes = [&](data::Split split, std::size_t wanted, bool all, const char* what) {
    std::map<std::string, std::vector<const data::SliceRecord*>> by_volume;
    for (const auto* s : dataset.of_split(split)) by_volume[s->volume_id].push_back(s);
    if (!all && by_volume.size() < wanted) {
      throw ConfigError(std::string("dataset has ") + std::to_string(by_volume.size()) + " " + what +
                        " volumes, config asks for " + std::to_string(wanted));
    }
    std::vector<const data::SliceRecord*> slices;
    std::size_t taken = 0;
    for (const auto& [id, v] : by_volume) {
      if (!all && taken == wanted) break;
      slices.insert(slices.end(), v.begin(), v.end());
      ++taken;
    }
    return slices;
  };
  out.labeled = take_volumes(data::Split::kLabeled, config.labeled_volumes, false, "labeled");
  out.unlabeled = take_volumes(data::Split::kUnlabeled, config.unlabeled_volumes, false, "unlabeled");
  out.val = take_volumes(data::Split::kVal, 0, true, "val");
  out.test = take_volumes(data::Split::kTest, 0, true, "test");
  for (const auto* s : out.labeled) {
    if (s->height() % 8 != 0 || s->width() % 8 != 0) {
      throw ConfigError("dataset slices are " + std::to_string(s->height()) + "x" + std::to_string(s->width()) +
                        "; the network needs multiples of 8");
    }
  }
  return out;
}

nets::UNetConfig unet_config(const TrainConfig& config) {
  nets::UNetConfig c;
  c.num_classes = config.organs + 1;
  return c;
}

template <typename T>
Tensor<T> stack_images(const std::vector<const Tensor<float>*>& images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const std::size_t H = images[0]->dim(0), W = images[0]->dim(1);
  Tensor<T> out({images.size(), 1, H, W});
  auto dst = out.mutable_data();
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->shape() != images[0]->shape()) {
      throw std::invalid_argument("stack_images: mixed image sizes " + shape_str(images[n]->shape()) + " and " +
                                  shape_str(images[0]->shape()));
    }
    const auto src = images[n]->data();
    for (std::size_t i = 0; i < H * W; ++i) dst[n * H * W + i] = static_cast<T>(src[i]);
  }
  return out;
}

// ---- Stage I ----------------------------------------------------------------

template <typename T>
Stage1Result<T> pretrain_stage1(const TrainConfig& config, const TrainingData& data) {
  config.validate();
  std::vector<const data::SliceRecord*> pool = data.labeled;
  pool.insert(pool.end(), data.unlabeled.begin(), data.unlabeled.end());
  if (pool.empty()) throw ConfigError("Stage I: no training slices");

  const auto net = unet_config(config);
  Stage1Result<T> result;
  result.params = nets::init_encoder<T>(net, config.seed);
  for (auto& [name, t] : nets::init_head<T>(net, config.seed)) result.params.add(name, t);
  result.report.num_foreground = data.num_foreground;

  Sgd<T> sgd(config.stage1_lr, config.momentum);
  std::mt19937_64 order_rng(stream_seed(config.seed, 101));
  std::mt19937_64 augment_rng(stream_seed(config.seed, 102));
  const data::AugmentConfig augment_config;
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto start = Clock::now();
  for (std::size_t epoch = 1; epoch <= config.stage1_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    std::vector<double> losses_seen;
    for (std::size_t begin = 0; begin < order.size(); begin += config.stage1_batch) {
      const std::size_t end = std::min(order.size(), begin + config.stage1_batch);
      std::vector<Tensor<float>> views;
      std::vector<double> positions;
      for (std::size_t i = begin; i < end; ++i) {
        const auto* slice = pool[order[i]];
        auto [a, b] = data::augment(*slice, augment_rng, augment_config);
        views.push_back(std::move(a));
        views.push_back(std::move(b));
        positions.push_back(slice->position);
        positions.push_back(slice->position);
      }
      std::vector<const Tensor<float>*> ptrs;
      for (const auto& v : views) ptrs.push_back(&v);
      const auto x = stack_images<T>(ptrs);

      const auto encoded = nets::encoder_forward(result.params, x);
      const auto z = nets::projection_head_forward(result.params, encoded.bottleneck);
      const auto loss = losses::gcl_loss(z, data::similarity_matrix(positions), config.threshold, config.tau,
                                         /*allow_empty=*/true);
      require_finite(loss, "Stage I global contrastive loss", epoch);
      backward(loss);
      clip_grad_norm(result.params, config.stage1_grad_clip);
      sgd.step(result.params);
      result.params.zero_grad();
      losses_seen.push_back(static_cast<double>(loss.item()));
      ++result.steps;
    }
    MetricsRow row;
    row.epoch = epoch;
    row.split = "stage1";
    row.loss_gcl = mean_of(losses_seen);
    result.report.rows.push_back(row);
  }
  result.report.seconds["stage1"] = seconds_since(start);
  return result;
}

// ---- Stage II ---------------------------------------------------------------

Stage2Streams::Stage2Streams(std::uint64_t seed)
    : sampling_(stream_seed(seed, 201)), student_noise_(stream_seed(seed, 202)), teacher_noise_(stream_seed(seed, 203)) {}

std::vector<std::size_t> Stage2Streams::sample(std::size_t population, std::size_t count) {
  if (population == 0) throw std::invalid_argument("Stage2Streams: sampling from an empty set");
  std::uniform_int_distribution<std::size_t> pick(0, population - 1);
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick(sampling_);
  return out;
}

template <typename T>
Tensor<T> Stage2Streams::perturb(const Tensor<T>& x, double sigma, std::mt19937_64& rng) {
  Tensor<T> out = x.detach();
  if (sigma <= 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : out.mutable_data()) v = static_cast<T>(static_cast<double>(v) + noise(rng));
  return out;
}

template <typename T>
nets::TeacherStudentPair<T> initial_stage2_pair(const TrainConfig& config,
                                                const nets::ModelParams<T>* pretrained_encoder) {
  const auto net = unet_config(config);
  if (pretrained_encoder) return nets::init_stage2(*pretrained_encoder, net, config.seed + 1, config.ema_alpha);
  return nets::init_stage2(nets::init_encoder<T>(net, config.seed), net, config.seed + 1, config.ema_alpha);
}

template <typename T>
Stage2Result<T> train_stage2(const TrainConfig& config, const TrainingData& data,
                             const nets::ModelParams<T>* pretrained_encoder, const Stage2Observer<T>& observer) {
  config.validate();
  if (data.labeled.empty()) throw ConfigError("Stage II: no labeled slices");
  const auto net = unet_config(config);
  const std::size_t C = data.num_foreground;
  const auto weights = config.loss_weights();

  Stage2Result<T> result;
  result.pair = initial_stage2_pair(config, pretrained_encoder);
  result.report.num_foreground = C;
  auto& pair = result.pair;

  Adam<T> adam(config.stage2_lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
  Stage2Streams streams(config.seed);
  losses::MemoryBank bank(C, net.proj_dim, config.bank_capacity);

  const std::size_t nl = config.stage2_labeled_batch;
  const std::size_t nu = data.unlabeled.empty() ? 0 : config.stage2_unlabeled_batch();
  const std::size_t steps_per_epoch = (data.labeled.size() + nl - 1) / nl;
  const std::size_t total_steps = steps_per_epoch * config.stage2_epochs;

  const auto start = Clock::now();
  for (std::size_t epoch = 1; epoch <= config.stage2_epochs; ++epoch) {
    const bool local_active = epoch >= config.local_start_epoch && nu > 0;
    std::vector<double> seg_seen, cons_seen, lcl_seen;
    double lambda3_last = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t step = (epoch - 1) * steps_per_epoch + s + 1;
      const auto li = streams.sample(data.labeled.size(), nl);
      const auto ui = nu ? streams.sample(data.unlabeled.size(), nu) : std::vector<std::size_t>{};

      std::vector<const Tensor<float>*> images;
      std::vector<std::uint8_t> labels;
      for (std::size_t i : li) {
        images.push_back(&data.labeled[i]->image);
        labels.insert(labels.end(), data.labeled[i]->label->begin(), data.labeled[i]->label->end());
      }
      for (std::size_t i : ui) images.push_back(&data.unlabeled[i]->image);
      const auto x = stack_images<T>(images);
      const auto xs = streams.student_view(x, config.input_noise);
      const auto xt = streams.teacher_view(x, config.input_noise);

      const auto dec_s = nets::decoder_forward(pair.student, nets::encoder_forward(pair.student, xs));
      const auto qs = softmax_channels(dec_s.logits);
      nets::DecoderOutput<T> dec_t;
      Tensor<T> qt;
      {
        NoGradGuard no_grad;
        dec_t = nets::decoder_forward(pair.teacher, nets::encoder_forward(pair.teacher, xt));
        qt = softmax_channels(dec_t.logits);
      }

      losses::Stage2Losses<T> parts;
      parts.seg = losses::dice_ce_loss(batch_range(dec_s.logits, 0, nl), labels).total;
      parts.cons = losses::consistency_loss(batch_range(qs, 0, nl), batch_range(qt, 0, nl));
      if (nu) parts.cons = add(parts.cons, losses::consistency_loss(batch_range(qs, nl, nu), batch_range(qt, nl, nu)));

      if (local_active) {
        {
          NoGradGuard no_grad;
          const auto proj_t = nets::projection_layer_forward(pair.teacher, batch_range(dec_t.features, 0, nl));
          for (const auto& centers : losses::mask_centers(proj_t, labels, C)) losses::bank_push(bank, centers);
        }
        const auto pseudo = losses::argmax_channels(batch_range(qt, nl, nu));
        const auto proj_s = nets::projection_layer_forward(pair.student, batch_range(dec_s.features, nl, nu));
        Tensor<T> lcl;
        for (const auto& centers : losses::mask_centers(proj_s, pseudo, C)) {
          const auto term = losses::lcl_loss(centers, bank, config.tau);
          lcl = lcl.defined() ? add(lcl, term) : term;
        }
        parts.lcl = scale(lcl, static_cast<T>(1.0 / static_cast<double>(nu)));
      }

      const double l3 = losses::lambda3(static_cast<double>(step), static_cast<double>(total_steps),
                                        config.lambda3_peak);
      const auto total = losses::stage2_total(parts, weights, l3, local_active);
      require_finite(total, "Stage II total loss", epoch);
      backward(total);
      adam.step(pair.student);
      pair.student.zero_grad();
      nets::ema_update(pair);

      Stage2StepInfo info;
      info.epoch = epoch;
      info.step = step;
      info.total_steps = total_steps;
      info.local_active = local_active;
      info.loss_seg = static_cast<double>(parts.seg.item());
      info.loss_cons = static_cast<double>(parts.cons.item());
      info.loss_lcl = local_active ? static_cast<double>(parts.lcl.item()) : 0.0;
      info.lambda3 = l3;
      info.total = static_cast<double>(total.item());
      if (observer) observer(info, pair, bank);

      seg_seen.push_back(info.loss_seg);
      cons_seen.push_back(info.loss_cons);
      lcl_seen.push_back(info.loss_lcl);
      lambda3_last = l3;
      ++result.steps;
    }

    MetricsRow row;
    row.epoch = epoch;
    row.split = "stage2";
    row.loss_seg = mean_of(seg_seen);
    row.loss_cons = mean_of(cons_seen);
    row.loss_lcl = mean_of(lcl_seen);
    row.lambda3 = lambda3_last;
    if (!data.val.empty()) {
      const auto scores = evaluate(pair.student, data.val, C, config.eval_batch);
      row.dice_mean = scores.dice_mean;
      row.ji_mean = scores.ji_mean;
      row.dice = scores.dice;
    }
    result.report.rows.push_back(row);
  }
  result.report.seconds["stage2"] = seconds_since(start);
  return result;
}

// ---- Evaluation -------------------------------------------------------------

template <typename T>
SegmentationScores evaluate(const nets::ModelParams<T>& params, const std::vector<const data::SliceRecord*>& slices,
                            std::size_t num_foreground, std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("evaluate: batch must be >= 1");
  VolumeScorer scorer(num_foreground);
  NoGradGuard no_grad;
  for (std::size_t begin = 0; begin < slices.size(); begin += batch) {
    const std::size_t end = std::min(slices.size(), begin + batch);
    std::vector<const Tensor<float>*> images;
    for (std::size_t i = begin; i < end; ++i) {
      if (!slices[i]->label) {
        throw std::invalid_argument("evaluate: slice " + std::to_string(slices[i]->slice_index) + " of volume " +
                                    slices[i]->volume_id + " has no label");
      }
      images.push_back(&slices[i]->image);
    }
    const auto logits = nets::decoder_forward(params, nets::encoder_forward(params, stack_images<T>(images))).logits;
    const auto pred = losses::argmax_channels(logits);
    const std::size_t plane = slices[begin]->image.numel();
    for (std::size_t i = begin; i < end; ++i) {
      const auto first = pred.begin() + static_cast<std::ptrdiff_t>((i - begin) * plane);
      scorer.add(slices[i]->volume_id, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(plane)),
                 *slices[i]->label);
    }
  }
  return scorer.result();
}

#define DCL_INSTANTIATE_TRAINER(T)                                                                          \
  template Tensor<T> stack_images<T>(const std::vector<const Tensor<float>*>&);                            \
  template Stage1Result<T> pretrain_stage1<T>(const TrainConfig&, const TrainingData&);                     \
  template Tensor<T> Stage2Streams::perturb<T>(const Tensor<T>&, double, std::mt19937_64&);                 \
  template nets::TeacherStudentPair<T> initial_stage2_pair<T>(const TrainConfig&, const nets::ModelParams<T>*);  \
  template Stage2Result<T> train_stage2<T>(const TrainConfig&, const TrainingData&, const nets::ModelParams<T>*, \
                                           const Stage2Observer<T>&);                                      \
  template SegmentationScores evaluate<T>(const nets::ModelParams<T>&, const std::vector<const data::SliceRecord*>&, \
                                          std::size_t, std::size_t);

DCL_INSTANTIATE_TRAINER(float)
DCL_INSTANTIATE_TRAINER(double)

}  // namespace dcl::train
