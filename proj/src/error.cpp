#include "domaincraft/error.hpp"

namespace domaincraft {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kAlignment: return "alignment";
    case ErrorKind::kEncoding: return "encoding";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kSize: return "size";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kEmptyDistribution: return "empty-distribution";
    case ErrorKind::kUnknownDomain: return "unknown-domain";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kManifest: return "manifest";
    case ErrorKind::kResults: return "results";
    case ErrorKind::kUnreachable: return "unreachable";
  }
  return "unknown";
}

}  // namespace domaincraft
