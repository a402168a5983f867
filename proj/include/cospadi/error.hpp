#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cospadi {

// Every failure raised by the library derives from Error. The two
// intermediate classes split failures the way the CLI reports them:
// ConfigError (exit 2) for bad parameters, DataError (exit 3) for inputs
// that cannot be processed.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidConfig : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BudgetTooSmall : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidRank : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class GroupShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NonFiniteValue : public DataError {
 public:
  using DataError::DataError;
};

class RankDeficient : public DataError {
 public:
  RankDeficient(std::size_t column, const std::string& what)
      : DataError(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class NotPositiveDefinite : public DataError {
 public:
  NotPositiveDefinite(std::size_t pivot, const std::string& what)
      : DataError(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class NotSymmetric : public DataError {
 public:
  using DataError::DataError;
};

class SingularTriangular : public DataError {
 public:
  SingularTriangular(std::size_t index, const std::string& what)
      : DataError(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class SvdNoConvergence : public DataError {
 public:
  using DataError::DataError;
};

class ZeroResidual : public DataError {
 public:
  using DataError::DataError;
};

class CorruptCodes : public DataError {
 public:
  using DataError::DataError;
};

class CorruptPayload : public DataError {
 public:
  CorruptPayload(std::size_t offset, const std::string& what)
      : DataError(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class NotACospadiFile : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedVersion : public DataError {
 public:
  using DataError::DataError;
};

class IngestError : public DataError {
 public:
  IngestError(std::string tensor, const std::string& what)
      : DataError(tensor.empty() ? what : "tensor '" + tensor + "': " + what),
        tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

}  // namespace cospadi
