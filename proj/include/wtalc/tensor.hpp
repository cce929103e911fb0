#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace wtalc {

// Every random draw in the library goes through this engine so a seed fixes a run.
using Rng = std::mt19937_64;

using Vector = std::vector<double>;

// Sorted, duplicate-free category indices.
using LabelSet = std::vector<std::size_t>;

/// Dense row-major matrix. Used for parameter blocks, where row r of a
/// weight matrix is the fan-in vector of output unit r.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A dim x length matrix indexed (row, t) whose columns are temporal
/// instants. Storage is column-major: one instant is contiguous, the same
/// layout the feature files use on disk.
class Sequence {
 public:
  Sequence() = default;
  Sequence(std::size_t dim, std::size_t length, double fill = 0.0)
      : dim_(dim), length_(length), data_(dim * length, fill) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t row, std::size_t t) { return data_[t * dim_ + row]; }
  double operator()(std::size_t row, std::size_t t) const { return data_[t * dim_ + row]; }

  std::span<double> instant(std::size_t t) { return {data_.data() + t * dim_, dim_}; }
  std::span<const double> instant(std::size_t t) const { return {data_.data() + t * dim_, dim_}; }

  // Copies row `r` across all instants (strided in storage).
  Vector row(std::size_t r) const;

  // Contiguous block of instants [start, start + count).
  Sequence slice(std::size_t start, std::size_t count) const;

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool operator==(const Sequence&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t length_ = 0;
  std::vector<double> data_;
};

}  // namespace wtalc
