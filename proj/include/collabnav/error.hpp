#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace collabnav {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlacementFailed : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class IdOutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

/// Binary/text format problems when reading datasets, checkpoints or worlds.
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, TruncatedRecord, Malformed };

  FormatError(Kind kind, const std::string& what, std::size_t record = 0)
      : Error(what), kind_(kind), record_(record) {}

  Kind kind() const { return kind_; }
  /// Index of the offending record for TruncatedRecord.
  std::size_t record() const { return record_; }

 private:
  Kind kind_;
  std::size_t record_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace collabnav
