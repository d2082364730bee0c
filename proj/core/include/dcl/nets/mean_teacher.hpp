#pragma once

#include <cstdint>

#include "dcl/nets/params.hpp"
#include "dcl/nets/unet.hpp"

namespace dcl::nets {

inline constexpr double kDefaultEmaDecay = 0.99;

// Student is trained by gradient descent; the teacher only ever moves through
// ema_update and never records gradients.
template <typename T>
struct TeacherStudentPair {
  ModelParams<T> student;
  ModelParams<T> teacher;
  double alpha = kDefaultEmaDecay;
};

// teacher <- alpha * teacher + (1 - alpha) * student, for every parameter.
template <typename T>
void ema_update(TeacherStudentPair<T>& pair);

// Student and teacher encoders copy `pretrained_encoder` (which must hold
// exactly the encoder parameter names); decoder, projection layer and output
// head are freshly initialised from `seed`; teacher starts equal to student.
template <typename T>
TeacherStudentPair<T> init_stage2(const ModelParams<T>& pretrained_encoder, const UNetConfig& config,
                                  std::uint64_t seed, double alpha = kDefaultEmaDecay);

}  // namespace dcl::nets
