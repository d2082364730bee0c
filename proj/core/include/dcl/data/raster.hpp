#pragma once

// Raster tensor file (little-endian):
//   bytes 0-3  magic "DCLT"
//   byte  4    version = 1
//   byte  5    precision (1 = single, 2 = double)
//   byte  6    rank r <= 4
//   byte  7    reserved = 0
//   r x u32 dims | u16 name length | UTF-8 name | row-major IEEE-754 payload

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dcl/tensor.hpp"

namespace dcl::data {

class RasterError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kBadPrecision, kBadRank, kBadReserved, kTruncated,
                    kDimOverflow, kTrailingBytes, kNameTooLong };

  RasterError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::size_t kMaxRasterRank = 4;

template <typename T>
void write_raster(const std::string& path, const Tensor<T>& tensor, const std::string& name = "");

// Values are converted to T when the stored precision differs.
template <typename T>
Tensor<T> read_raster(const std::string& path, std::string* name = nullptr);

}  // namespace dcl::data
