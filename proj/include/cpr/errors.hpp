#pragma once

#include <stdexcept>
#include <string>

namespace cpr {

// Raised when an input violates a documented contract (bad shapes, missing
// views, malformed files, invalid configuration). The CLI maps it to exit 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace cpr
