#pragma once

#include <stdexcept>
#include <string>

namespace refsr {

/// Process exit codes shared by every CLI entry point.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kIo = 3,
  kGeometry = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Dimension or layout inconsistency between operands.
class GeometryError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kGeometry; }
};

/// Out-of-range parameter or invalid configuration.
class ParameterError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

/// Unreadable, unwritable or malformed file.
class FormatError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

}  // namespace refsr
