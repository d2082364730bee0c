#include "dcl/nets/checkpoint.hpp"

#include <limits>

#include "../binary_io.hpp"

namespace dcl::nets {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'L', 'N'};
constexpr std::uint8_t kVersion = 1;
const std::string kStudent = "student/";
const std::string kTeacher = "teacher/";
const std::string kAlpha = "ema/alpha";

template <typename T>
void put_param(io::ByteWriter& w, const std::string& name, const Tensor<T>& t) {
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw CheckpointError("checkpoint: parameter name too long: " + name);
  }
  if (t.rank() > std::numeric_limits<std::uint8_t>::max()) {
    throw CheckpointError("checkpoint: rank too large for '" + name + "'");
  }
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.raw(name.data(), name.size());
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw CheckpointError("checkpoint: dimension overflow for '" + name + "'");
    }
    w.u32(static_cast<std::uint32_t>(d));
  }
  for (T v : t.data()) w.f32(static_cast<float>(v));
}

template <typename T>
ModelParams<T> parse(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  io::ByteReader<CheckpointError> r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw CheckpointError("checkpoint '" + path + "': bad magic");
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw CheckpointError("checkpoint '" + path + "': unsupported version " +
                          std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  ModelParams<T> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d != 0 && numel > std::numeric_limits<std::size_t>::max() / 4 / d) {
        throw CheckpointError("checkpoint '" + path + "': dimension overflow in '" + name + "'");
      }
      numel *= d;
    }
    r.need(numel * 4);
    std::vector<T> values(numel);
    for (auto& v : values) v = static_cast<T>(r.f32());
    params.add(name, Tensor<T>(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) {
    throw CheckpointError("checkpoint '" + path + "': " + std::to_string(r.remaining()) +
                          " trailing bytes");
  }
  return params;
}

template <typename T>
io::ByteWriter header(std::size_t count) {
  io::ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(count));
  return w;
}

}  // namespace

template <typename T>
void write_checkpoint(const std::string& path, const ModelParams<T>& params) {
  io::ByteWriter w = header<T>(params.size());
  for (const auto& [name, t] : params) put_param(w, name, t);
  io::write_file(path, w.bytes());
}

template <typename T>
ModelParams<T> read_checkpoint(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return parse<T>(bytes, path);
}

template <typename T>
void write_pair_checkpoint(const std::string& path, const TeacherStudentPair<T>& pair) {
  io::ByteWriter w = header<T>(pair.student.size() + pair.teacher.size() + 1);
  // Lexicographic order of the combined name set.
  put_param(w, kAlpha, Tensor<T>::scalar(static_cast<T>(pair.alpha)));
  for (const auto& [name, t] : pair.student) put_param(w, kStudent + name, t);
  for (const auto& [name, t] : pair.teacher) put_param(w, kTeacher + name, t);
  io::write_file(path, w.bytes());
}

template <typename T>
TeacherStudentPair<T> read_pair_checkpoint(const std::string& path) {
  ModelParams<T> all = read_checkpoint<T>(path);
  if (!all.contains(kAlpha)) {
    throw CheckpointError("checkpoint '" + path + "': not a mean-teacher checkpoint (no " + kAlpha + ")");
  }
  TeacherStudentPair<T> pair;
  // Stored as f32; round-trip through float to recover the written decay.
  pair.alpha = static_cast<double>(static_cast<float>(all.at(kAlpha).item()));
  for (const auto& [name, t] : all) {
    if (name.compare(0, kStudent.size(), kStudent) == 0) {
      Tensor<T> s = t;
      s.set_requires_grad(true);
      pair.student.add(name.substr(kStudent.size()), s);
    } else if (name.compare(0, kTeacher.size(), kTeacher) == 0) {
      pair.teacher.add(name.substr(kTeacher.size()), t);
    } else if (name != kAlpha) {
      throw CheckpointError("checkpoint '" + path + "': unexpected entry '" + name + "'");
    }
  }
  if (pair.student.names() != pair.teacher.names()) {
    throw CheckpointError("checkpoint '" + path + "': student and teacher name sets differ");
  }
  return pair;
}

template void write_checkpoint(const std::string&, const ModelParams<float>&);
template void write_checkpoint(const std::string&, const ModelParams<double>&);
template ModelParams<float> read_checkpoint<float>(const std::string&);
template ModelParams<double> read_checkpoint<double>(const std::string&);
template void write_pair_checkpoint(const std::string&, const TeacherStudentPair<float>&);
template void write_pair_checkpoint(const std::string&, const TeacherStudentPair<double>&);
template TeacherStudentPair<float> read_pair_checkpoint<float>(const std::string&);
template TeacherStudentPair<double> read_pair_checkpoint<double>(const std::string&);

}  // namespace dcl::nets
