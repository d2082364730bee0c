#pragma once

#include <cstddef>
#include <deque>
#include <vector>

namespace dcl::losses {

// One FIFO per foreground class (1..C_fg), each holding at most `capacity`
// raw K-vectors, oldest first.
class MemoryBank {
 public:
  using Vector = std::vector<double>;

  MemoryBank(std::size_t num_foreground, std::size_t dim, std::size_t capacity);

  std::size_t num_foreground() const { return buffers_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t capacity() const { return capacity_; }

  // Throws std::invalid_argument on a class outside 1..C_fg or a vector whose
  // length differs from dim().
  void push(std::size_t c, Vector v);

  const std::deque<Vector>& buffer(std::size_t c) const;
  std::size_t size(std::size_t c) const { return buffer(c).size(); }
  std::size_t total() const;
  bool empty() const { return total() == 0; }
  void clear();

 private:
  std::size_t dim_;
  std::size_t capacity_;
  std::vector<std::deque<Vector>> buffers_;
};

}  // namespace dcl::losses
