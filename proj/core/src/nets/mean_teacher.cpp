#include "dcl/nets/mean_teacher.hpp"

#include <stdexcept>

namespace dcl::nets {

template <typename T>
void ema_update(TeacherStudentPair<T>& pair) {
  if (pair.student.names() != pair.teacher.names()) {
    throw std::invalid_argument("ema_update: student and teacher parameter names differ");
  }
  if (!(pair.alpha > 0.0 && pair.alpha < 1.0)) {
    throw std::invalid_argument("ema_update: alpha must lie in (0, 1)");
  }
  const T a = static_cast<T>(pair.alpha);
  const T b = static_cast<T>(1.0 - pair.alpha);
  auto s = pair.student.begin();
  for (auto t = pair.teacher.begin(); t != pair.teacher.end(); ++t, ++s) {
    if (t->second.shape() != s->second.shape()) {
      throw std::invalid_argument("ema_update: shape mismatch for '" + t->first + "'");
    }
    auto dst = t->second.mutable_data();
    auto src = s->second.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a * dst[i] + b * src[i];
  }
}

template <typename T>
TeacherStudentPair<T> init_stage2(const ModelParams<T>& pretrained_encoder, const UNetConfig& config,
                                  std::uint64_t seed, double alpha) {
  const ModelParams<T> fresh_encoder = init_encoder<T>(config, seed);
  for (const auto& name : fresh_encoder.names()) {
    if (!pretrained_encoder.contains(name)) {
      throw std::invalid_argument("init_stage2: pretrained weights missing '" + name + "'");
    }
    if (pretrained_encoder.at(name).shape() != fresh_encoder.at(name).shape()) {
      throw std::invalid_argument("init_stage2: pretrained '" + name + "' has shape " +
                                  shape_str(pretrained_encoder.at(name).shape()) + ", expected " +
                                  shape_str(fresh_encoder.at(name).shape()));
    }
  }
  for (const auto& name : pretrained_encoder.names()) {
    if (!fresh_encoder.contains(name)) {
      throw std::invalid_argument("init_stage2: unexpected pretrained parameter '" + name + "'");
    }
  }
  TeacherStudentPair<T> pair;
  pair.alpha = alpha;
  pair.student = pretrained_encoder.clone(true);
  for (auto& [name, t] : init_segmentation_tail<T>(config, seed)) pair.student.add(name, t);
  pair.teacher = pair.student.clone(false);
  return pair;
}

template void ema_update(TeacherStudentPair<float>&);
template void ema_update(TeacherStudentPair<double>&);
template TeacherStudentPair<float> init_stage2(const ModelParams<float>&, const UNetConfig&,
                                               std::uint64_t, double);
template TeacherStudentPair<double> init_stage2(const ModelParams<double>&, const UNetConfig&,
                                                std::uint64_t, double);

}  // namespace dcl::nets
