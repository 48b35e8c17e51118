#include "eofair/error.hpp"

namespace eofair {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kSchema:
    case ErrorKind::kValue:
    case ErrorKind::kParse:
      return 2;
    case ErrorKind::kGroupCoverage:
      return 3;
    case ErrorKind::kNumeric:
      return 4;
    case ErrorKind::kConfig:
      return 5;
  }
  return 1;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kSchema:
      return "schema error";
    case ErrorKind::kValue:
      return "value error";
    case ErrorKind::kParse:
      return "parse error";
    case ErrorKind::kGroupCoverage:
      return "group-coverage error";
    case ErrorKind::kNumeric:
      return "numeric error";
    case ErrorKind::kConfig:
      return "config error";
  }
  return "error";
}

}  // namespace eofair
