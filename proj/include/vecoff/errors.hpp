#pragma once

#include <stdexcept>
#include <string>

namespace vecoff {

// Malformed or inconsistent input data (DAGs, scenarios, assignments).
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration (unknown keys, unparsable or out-of-range values).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Exhaustive search requested over an assignment space larger than the cap.
class CapExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace vecoff
