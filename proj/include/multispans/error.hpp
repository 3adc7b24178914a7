#pragma once

#include <stdexcept>
#include <string>

namespace multispans {

// Malformed input files or data that violate a documented invariant.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A well-formed request that cannot be satisfied, e.g. too few attention
// heads for the number of masks.
class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace multispans
