#include "surfmatch/error.h"

namespace surfmatch {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "INVALID_ARGUMENT";
    case ErrorCode::kParseError:
      return "PARSE_ERROR";
    case ErrorCode::kDegenerateGrid:
      return "DEGENERATE_GRID";
    case ErrorCode::kRankDeficient:
      return "RANK_DEFICIENT";
    case ErrorCode::kNoCorrespondences:
      return "NO_CORRESPONDENCES";
    case ErrorCode::kInvalidPolygon:
      return "INVALID_POLYGON";
  }
  return "UNKNOWN";
}

}  // namespace surfmatch
