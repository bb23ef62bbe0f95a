#pragma once

#include <stdexcept>
#include <string>

namespace yolospp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or layer wiring that cannot be combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Weight-file failure; `layer()` is the graph index of the offending layer or -1 for the header.
class LoadError : public Error {
 public:
  LoadError(const std::string& what, int layer)
      : Error(layer >= 0 ? "layer " + std::to_string(layer) + ": " + what : what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward without a forward or inference on an unparameterized network.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace yolospp
