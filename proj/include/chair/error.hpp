#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chair {

enum class ErrorCode {
  Parse,
  Conflict,
  Structure,
  Mapping,
  Integrity,
  Format,
  Config,
  MissingPredictions,
  Io,
};

/// Stable machine-readable name, e.g. "parse_error".
std::string_view error_code_name(ErrorCode code);

/// Base exception for every failure raised by the toolkit. The code drives
/// the CLI exit status and the single-line diagnostic format.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chair
