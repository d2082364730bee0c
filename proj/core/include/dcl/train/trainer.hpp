#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "dcl/data/dataset.hpp"
#include "dcl/losses/memory_bank.hpp"
#include "dcl/nets/mean_teacher.hpp"
#include "dcl/nets/unet.hpp"
#include "dcl/train/config.hpp"
#include "dcl/train/metrics.hpp"

namespace dcl::train {

// A loss became NaN or infinite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Slices used by one run. Labeled and unlabeled volumes are the first n and
// m volume ids (in id order) of the corresponding dataset splits.
struct TrainingData {
  std::vector<const data::SliceRecord*> labeled, unlabeled, val, test;
  std::size_t num_foreground = 0;
};

// Throws ConfigError when the dataset holds fewer volumes than requested or
// its class count disagrees with the config.
TrainingData select_training_data(const data::Dataset& dataset, const TrainConfig& config);

nets::UNetConfig unet_config(const TrainConfig& config);

// N x 1 x H x W batch of the given images.
template <typename T>
Tensor<T> stack_images(const std::vector<const Tensor<float>*>& images);

// ---- Stage I --------------------------------------------------------------

template <typename T>
struct Stage1Result {
  nets::ModelParams<T> params;  // encoder + projection head
  MetricsReport report;         // one "stage1" row per epoch
  std::size_t steps = 0;
};

// Global contrastive pretraining on labeled and unlabeled slices (labels are
// never read). Each epoch visits the pool once in shuffled batches of B
// slices, each expanded into two augmented views.
template <typename T>
Stage1Result<T> pretrain_stage1(const TrainConfig& config, const TrainingData& data);

// ---- Stage II -------------------------------------------------------------

// Independent random streams for Stage II: batch sampling, student input
// noise and teacher input noise. Exposed so that reference loops can
// reproduce a run draw for draw.
class Stage2Streams {
 public:
  explicit Stage2Streams(std::uint64_t seed);

  // `count` indices drawn uniformly with replacement from [0, population).
  std::vector<std::size_t> sample(std::size_t population, std::size_t count);

  template <typename T>
  Tensor<T> student_view(const Tensor<T>& x, double sigma) { return perturb(x, sigma, student_noise_); }
  template <typename T>
  Tensor<T> teacher_view(const Tensor<T>& x, double sigma) { return perturb(x, sigma, teacher_noise_); }

 private:
  template <typename T>
  static Tensor<T> perturb(const Tensor<T>& x, double sigma, std::mt19937_64& rng);

  std::mt19937_64 sampling_, student_noise_, teacher_noise_;
};

struct Stage2StepInfo {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // 1-based global step
  std::size_t total_steps = 0;
  bool local_active = false;
  double loss_seg = 0, loss_cons = 0, loss_lcl = 0, lambda3 = 0, total = 0;
};

// Called after the optimizer and EMA updates of every step.
template <typename T>
using Stage2Observer =
    std::function<void(const Stage2StepInfo&, const nets::TeacherStudentPair<T>&, const losses::MemoryBank&)>;

template <typename T>
struct Stage2Result {
  nets::TeacherStudentPair<T> pair;
  MetricsReport report;  // one "stage2" row per epoch, scores on the val split
  std::size_t steps = 0;
};

// Stage II starting point: the encoder comes from `pretrained_encoder` (or a
// fresh initialisation from config.seed when null); the rest of the student
// is initialised from config.seed + 1 and the teacher starts as its copy.
template <typename T>
nets::TeacherStudentPair<T> initial_stage2_pair(const TrainConfig& config,
                                                const nets::ModelParams<T>* pretrained_encoder);

// Steps per epoch = ceil(labeled slices / labeled per batch); the warm-up
// horizon is the total number of steps. `pretrained_encoder` may be null for
// a randomly initialised encoder.
template <typename T>
Stage2Result<T> train_stage2(const TrainConfig& config, const TrainingData& data,
                             const nets::ModelParams<T>* pretrained_encoder,
                             const Stage2Observer<T>& observer = {});

// ---- Evaluation -----------------------------------------------------------

// Argmax predictions of the segmentation network, scored per volume.
// Throws std::invalid_argument for a slice without a label.
template <typename T>
SegmentationScores evaluate(const nets::ModelParams<T>& params, const std::vector<const data::SliceRecord*>& slices,
                            std::size_t num_foreground, std::size_t batch = 16);

}  // namespace dcl::train
