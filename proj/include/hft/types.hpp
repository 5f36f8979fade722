#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hft {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Base class for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition (dimension mismatch, bad size).
class ContractError : public Error {
public:
  using Error::Error;
};

// Malformed input file. `offset` is the byte offset (or line number for text
// formats) where decoding failed.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

// Input data is unusable (empty training set, length mismatch, ...).
class DataError : public Error {
public:
  using Error::Error;
};

// File could not be opened, read, or written.
class IoError : public Error {
public:
  using Error::Error;
};

class OptimizationError : public Error {
public:
  using Error::Error;
};

class TrackingLost : public Error {
public:
  TrackingLost(const std::string& what, int frame) : Error(what), frame_(frame) {}
  int frame() const noexcept { return frame_; }

private:
  int frame_;
};

// Axis-aligned box, (x, y) is the top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  bool operator==(const Box&) const = default;
};

}  // namespace hft
