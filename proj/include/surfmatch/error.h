#ifndef SURFMATCH_ERROR_H_
#define SURFMATCH_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace surfmatch {

enum class ErrorCode {
  kInvalidArgument,
  kParseError,
  kDegenerateGrid,
  kRankDeficient,
  kNoCorrespondences,
  kInvalidPolygon,
};

// Upper-case identifier used in diagnostics, e.g. "RANK_DEFICIENT".
std::string_view ToString(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace surfmatch

#endif  // SURFMATCH_ERROR_H_
