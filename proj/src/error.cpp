#include "irtci/error.hpp"

namespace irtci {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnobservedCategory: return "UnobservedCategory";
    case ErrorCode::EmptyCategory: return "EmptyCategory";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::AlreadyMissing: return "AlreadyMissing";
    case ErrorCode::ModelFormat: return "ModelFormat";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return 1;
    case ErrorCode::NumericalFailure:
    case ErrorCode::NewtonDiverged:
    case ErrorCode::SingularCovariance:
      return 3;
    default:
      return 2;
  }
}

}  // namespace irtci
