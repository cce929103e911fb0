#include "wtalc/tensor.hpp"

#include <algorithm>

#include "wtalc/errors.hpp"

namespace wtalc {

Vector Sequence::row(std::size_t r) const {
  Vector out(length_);
  for (std::size_t t = 0; t < length_; ++t) out[t] = (*this)(r, t);
  return out;
}

Sequence Sequence::slice(std::size_t start, std::size_t count) const {
  if (start + count > length_) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") exceeds sequence length " + std::to_string(length_));
  }
  Sequence out(dim_, count);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(start * dim_), count * dim_, out.data_.begin());
  return out;
}

}  // namespace wtalc
