#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epbrm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (truncated binary, bad label line, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file or directory could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Tensor or vector dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation that needs at least one point received none.
class EmptyCloudError : public Error {
 public:
  using Error::Error;
};

/// A transformation stage moved every point out of the sampling region.
class StageCropError : public EmptyCloudError {
 public:
  explicit StageCropError(std::size_t stage)
      : EmptyCloudError("stage " + std::to_string(stage) +
                        " transform left no points inside the sampling region"),
        stage_(stage) {}
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t stage_;
};

/// Invalid user-facing configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace epbrm
