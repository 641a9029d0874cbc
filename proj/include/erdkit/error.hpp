#pragma once

#include <stdexcept>
#include <string>

namespace erdkit {

/// Raised for malformed inputs, bad configurations, and contract violations
/// at API boundaries. The CLI maps this to exit code 2; anything else is an
/// internal error (exit code 1).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace erdkit
