#include "spider/error.hpp"

namespace spider {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kArgument: return "argument_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kBounds: return "bounds_error";
    case ErrorCode::kValue: return "value_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kLoad: return "load_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kMetric: return "metric_error";
    case ErrorCode::kOracle: return "oracle_error";
  }
  return "error";
}

}  // namespace spider
