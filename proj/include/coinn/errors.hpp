#pragma once

#include <stdexcept>
#include <string>

namespace coinn {

// Bad or incomplete run configuration (missing seed, unresolvable path, unknown key).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or invariant-violating input data; messages carry file/line context.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace coinn
