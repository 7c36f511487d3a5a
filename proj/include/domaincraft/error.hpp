#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace domaincraft {

enum class ErrorKind {
  kAlignment,
  kEncoding,
  kIo,
  kSize,
  kValidation,
  kEmptyDistribution,
  kUnknownDomain,
  kNumeric,
  kCheckpoint,
  kConfig,
  kManifest,
  kResults,
  kUnreachable,
};

std::string_view to_string(ErrorKind kind);

// Every failure the toolkit reports is an Error; the kind maps onto the
// machine-parsable token the CLI prints.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace domaincraft
