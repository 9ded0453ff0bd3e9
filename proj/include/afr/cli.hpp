#pragma once

#include <iosfwd>

namespace afr {

enum ExitStatus : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitProvider = 3,
  kExitThreshold = 4,
};

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace afr
