#pragma once

#include <stdexcept>
#include <string>

namespace acevc {

/// Failure categories callers may need to tell apart.
enum class ErrorCode {
  kGeneric,
  kInvalidInput,
  kIo,
  kFormat,
  kChecksum,
  kVersion,
  kFingerprint,
  kNonFinite,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorCode code = ErrorCode::kGeneric)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace acevc
