#pragma once

// Checkpoint file layout (little-endian):
//   "DCLN" | u8 version = 1 | u32 parameter count
//   per parameter: u16 name length | UTF-8 name | u8 rank | rank x u32 dims |
//                  row-major f32 payload
// A mean-teacher checkpoint stores "student/<name>" and "teacher/<name>"
// entries plus a rank-0 "ema/alpha".

#include <stdexcept>
#include <string>

#include "dcl/nets/mean_teacher.hpp"
#include "dcl/nets/params.hpp"

namespace dcl::nets {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void write_checkpoint(const std::string& path, const ModelParams<T>& params);
// Loaded tensors are leaves without requires_grad.
template <typename T>
ModelParams<T> read_checkpoint(const std::string& path);

template <typename T>
void write_pair_checkpoint(const std::string& path, const TeacherStudentPair<T>& pair);
template <typename T>
TeacherStudentPair<T> read_pair_checkpoint(const std::string& path);

}  // namespace dcl::nets
