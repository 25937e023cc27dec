#pragma once

#include <stdexcept>
#include <string>

namespace scansnap {

// Numerical divergence (|z| guard, non-finite loss). The CLI maps it to exit 2.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kDivergenceGuard = 500.0;

}  // namespace scansnap
