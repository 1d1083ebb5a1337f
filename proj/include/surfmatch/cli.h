#ifndef SURFMATCH_CLI_H_
#define SURFMATCH_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "surfmatch/error.h"

namespace surfmatch {
namespace cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParseError = 2;
inline constexpr int kExitInvalidArgument = 3;
inline constexpr int kExitNotConverged = 4;
inline constexpr int kExitRankDeficient = 5;
inline constexpr int kExitNoCorrespondences = 6;
inline constexpr int kExitDegenerateGrid = 7;

int ExitCodeFor(ErrorCode code);

// Runs one command line (args excludes the program name). Normal output
// goes to `out`; failures print one "error code=... msg=..." line to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace cli
}  // namespace surfmatch

#endif  // SURFMATCH_CLI_H_
