#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irtci {

enum class ErrorCode {
  // usage
  InvalidArgument,
  // data
  Io,
  EmptyFile,
  MalformedRow,
  UnknownColumn,
  MissingColumn,
  UnknownLabel,
  InvalidSchema,
  DegenerateColumn,
  CodeOutOfRange,
  SchemaMismatch,
  InsufficientData,
  UnobservedCategory,
  EmptyCategory,
  MissingTruth,
  AlreadyMissing,
  ModelFormat,
  // numerical
  NumericalFailure,
  NewtonDiverged,
  SingularCovariance,
};

std::string_view to_string(ErrorCode code);

/// Process exit status for an error: 1 usage, 2 data, 3 numerical.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace irtci
