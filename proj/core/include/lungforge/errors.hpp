#pragma once

#include <stdexcept>
#include <string>

namespace lungforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Unsupported or malformed file content (bit depth, magic bytes, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Shapes that do not agree, or images too small for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data that makes a computation meaningless (too few distinct values,
/// zero-norm embeddings, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A metric that is undefined for the given input, e.g. AUC on one class.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] void throw_parameter(const std::string& what);
[[noreturn]] void throw_dimension(const std::string& what);

}  // namespace lungforge
