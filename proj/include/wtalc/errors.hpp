#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wtalc {

// Base of everything the library throws on bad input or failed checks.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent file contents (manifest, feature, parameter files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Matrix shapes that do not agree with each other or with a declared shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The dataset cannot produce batches with the requested number of same-class pairs.
class DegenerateDatasetError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became non-finite during training.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace wtalc
