#pragma once

#include <stdexcept>
#include <string>

namespace ljgibbs {

// Window/partition/border-correction violations (empty erosion, pattern
// window too small for minus sampling, non-conforming cell partition).
class geometry_error : public std::runtime_error {
public:
  explicit geometry_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimizer non-convergence, singular or ill-conditioned matrices,
// non-finite intermediate values.
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or malformed files (CSV patterns, JSON configs).
class io_error : public std::runtime_error {
public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ljgibbs
