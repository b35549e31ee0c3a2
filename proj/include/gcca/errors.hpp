#pragma once

#include <stdexcept>
#include <string>

namespace gcca {

// Raised when a numerical assumption of an algorithm does not hold on the
// data at hand (non positive definite denominator, vanishing lagged
// correlation, ...). Argument and shape errors use std::invalid_argument.
class precondition_error : public std::runtime_error {
 public:
  explicit precondition_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail
}  // namespace gcca
