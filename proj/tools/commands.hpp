#pragma once

#include <iosfwd>

namespace tinydl::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,  // gradcheck found a mismatch
  kConfigError = 2,
  kNumericError = 3,
  kIoError = 4,
};

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tinydl::cli
