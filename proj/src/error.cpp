#include "chair/error.hpp"

namespace chair {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Conflict: return "conflict_error";
    case ErrorCode::Structure: return "structure_error";
    case ErrorCode::Mapping: return "mapping_error";
    case ErrorCode::Integrity: return "integrity_error";
    case ErrorCode::Format: return "format_error";
    case ErrorCode::Config: return "config_error";
    case ErrorCode::MissingPredictions: return "missing_predictions";
    case ErrorCode::Io: return "io_error";
  }
  return "error";
}

}  // namespace chair
