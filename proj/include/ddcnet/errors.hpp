#pragma once

#include <stdexcept>
#include <string>

namespace ddcnet {

// Base for every error the library raises. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { Shape, Config, Data, Numeric, Checkpoint };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(Kind::Shape, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Kind::Numeric, what) {}
};

class CheckpointError : public Error {
 public:
  enum class Reason { VersionMismatch, Corrupt, MissingTensor, ConfigMismatch, Io };

  CheckpointError(Reason reason, const std::string& what)
      : Error(Kind::Checkpoint, what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

}  // namespace ddcnet
