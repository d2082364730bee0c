#include "dcl/losses/memory_bank.hpp"

#include <stdexcept>
#include <string>

namespace dcl::losses {

MemoryBank::MemoryBank(std::size_t num_foreground, std::size_t dim, std::size_t capacity)
    : dim_(dim), capacity_(capacity), buffers_(num_foreground) {
  if (num_foreground == 0) throw std::invalid_argument("MemoryBank: need at least one class");
  if (dim == 0) throw std::invalid_argument("MemoryBank: vector dimension must be > 0");
  if (capacity == 0) throw std::invalid_argument("MemoryBank: capacity must be > 0");
}

void MemoryBank::push(std::size_t c, Vector v) {
  if (c < 1 || c > buffers_.size()) {
    throw std::invalid_argument("MemoryBank: class " + std::to_string(c) + " outside 1.." +
                                std::to_string(buffers_.size()));
  }
  if (v.size() != dim_) {
    throw std::invalid_argument("MemoryBank: vector of length " + std::to_string(v.size()) +
                                " pushed into a bank of dimension " + std::to_string(dim_));
  }
  auto& buf = buffers_[c - 1];
  buf.push_back(std::move(v));
  if (buf.size() > capacity_) buf.pop_front();
}

const std::deque<MemoryBank::Vector>& MemoryBank::buffer(std::size_t c) const {
  if (c < 1 || c > buffers_.size()) {
    throw std::out_of_range("MemoryBank: class " + std::to_string(c) + " outside 1.." +
                            std::to_string(buffers_.size()));
  }
  return buffers_[c - 1];
}

std::size_t MemoryBank::total() const {
  std::size_t n = 0;
  for (const auto& b : buffers_) n += b.size();
  return n;
}

void MemoryBank::clear() {
  for (auto& b : buffers_) b.clear();
}

}  // namespace dcl::losses
