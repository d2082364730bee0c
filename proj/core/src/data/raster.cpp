#include "dcl/data/raster.hpp"

#include <limits>

#include "../binary_io.hpp"

namespace dcl::data {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'L', 'T'};
constexpr std::uint8_t kVersion = 1;

// Adapts ByteReader's truncation message into a typed error.
struct TruncatedError : RasterError {
  explicit TruncatedError(const std::string& m) : RasterError(Kind::kTruncated, "raster: " + m) {}
};

}  // namespace

template <typename T>
void write_raster(const std::string& path, const Tensor<T>& tensor, const std::string& name) {
  using Kind = RasterError::Kind;
  if (tensor.rank() > kMaxRasterRank) {
    throw RasterError(Kind::kBadRank, "raster: rank " + std::to_string(tensor.rank()) + " exceeds 4");
  }
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw RasterError(Kind::kNameTooLong, "raster: name longer than 65535 bytes");
  }
  io::ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(precision_of<T>()));
  w.u8(static_cast<std::uint8_t>(tensor.rank()));
  w.u8(0);
  for (std::size_t d : tensor.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw RasterError(Kind::kDimOverflow, "raster: dimension " + std::to_string(d) + " exceeds u32");
    }
    w.u32(static_cast<std::uint32_t>(d));
  }
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.raw(name.data(), name.size());
  for (T v : tensor.data()) {
    if constexpr (std::is_same_v<T, float>) w.f32(v);
    else w.f64(v);
  }
  try {
    io::write_file(path, w.bytes());
  } catch (const std::runtime_error& e) {
    throw RasterError(Kind::kIo, std::string("raster: ") + e.what());
  }
}

template <typename T>
Tensor<T> read_raster(const std::string& path, std::string* name) {
  using Kind = RasterError::Kind;
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw RasterError(Kind::kIo, std::string("raster: ") + e.what());
  }
  io::ByteReader<TruncatedError> r(bytes);
  if (bytes.size() < 4 || r.str(4) != std::string(kMagic, 4)) {
    throw RasterError(Kind::kBadMagic, "raster '" + path + "': bad magic (expected DCLT)");
  }
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw RasterError(Kind::kBadVersion, "raster '" + path + "': unsupported version " +
                                             std::to_string(version));
  }
  const std::uint8_t precision = r.u8();
  if (precision != 1 && precision != 2) {
    throw RasterError(Kind::kBadPrecision, "raster '" + path + "': unknown precision code " +
                                               std::to_string(precision));
  }
  const std::uint8_t rank = r.u8();
  if (rank > kMaxRasterRank) {
    throw RasterError(Kind::kBadRank, "raster '" + path + "': rank " + std::to_string(rank) + " exceeds 4");
  }
  if (r.u8() != 0) throw RasterError(Kind::kBadReserved, "raster '" + path + "': reserved byte not 0");
  Shape shape(rank);
  const std::size_t elem = precision == 1 ? 4 : 8;
  std::size_t numel = 1;
  for (auto& d : shape) {
    d = r.u32();
    if (d != 0 && numel > std::numeric_limits<std::size_t>::max() / elem / d) {
      throw RasterError(Kind::kDimOverflow, "raster '" + path + "': dims overflow payload size");
    }
    numel *= d;
  }
  std::string stored_name = r.str(r.u16());
  if (r.remaining() < numel * elem) {
    throw RasterError(Kind::kTruncated, "raster '" + path + "': payload truncated, expected " +
                                            std::to_string(numel * elem) + " bytes, found " +
                                            std::to_string(r.remaining()));
  }
  std::vector<T> values(numel);
  for (auto& v : values) v = precision == 1 ? static_cast<T>(r.f32()) : static_cast<T>(r.f64());
  if (r.remaining() != 0) {
    throw RasterError(Kind::kTrailingBytes, "raster '" + path + "': " + std::to_string(r.remaining()) +
                                                " trailing bytes");
  }
  if (name) *name = std::move(stored_name);
  return Tensor<T>(std::move(shape), std::move(values));
}

template void write_raster(const std::string&, const Tensor<float>&, const std::string&);
template void write_raster(const std::string&, const Tensor<double>&, const std::string&);
template Tensor<float> read_raster<float>(const std::string&, std::string*);
template Tensor<double> read_raster<double>(const std::string&, std::string*);

}  // namespace dcl::data
