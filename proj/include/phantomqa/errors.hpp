#pragma once

#include <stdexcept>
#include <string>

namespace phantomqa {

// Exit-code contract used by the CLI: 0 success, 1 usage, 2 I/O,
// 3 file format, 4 config validation.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitFormat = 3,
  kExitConfig = 4,
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace phantomqa
