#pragma once

#include <stdexcept>
#include <string>

namespace visrec {

// Bad user input: unusable flags, missing input files, out-of-range config
// values. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken data encountered at runtime: corrupt files, checksum mismatches,
// incompatible artifacts. The CLI maps these to exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace visrec
