#include "common.hpp"

#include <cerrno>
#include <cstring>

namespace kgs {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kStorage: return "storage-failure";
    case ErrorCode::kBusy: return "busy";
    case ErrorCode::kNotFound: return "absent-term";
    case ErrorCode::kOutOfRange: return "index-out-of-range";
    case ErrorCode::kInvalidOrdering: return "invalid-ordering";
    case ErrorCode::kIdSpaceExhausted: return "id-space-exhausted";
    case ErrorCode::kCorrupt: return "corrupt";
    case ErrorCode::kEmptyTable: return "empty-table";
    case ErrorCode::kValueTooLarge: return "value-too-large";
    case ErrorCode::kWidthOverflow: return "width-overflow";
    case ErrorCode::kUnsorted: return "unsorted-input";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

void throw_errno(const std::string& what) {
  int err = errno;
  throw Error(ErrorCode::kStorage, what + ": " + std::strerror(err));
}

}  // namespace kgs
