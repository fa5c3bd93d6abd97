#pragma once

#include <stdexcept>
#include <string>

namespace numalab {

/// Raised for invalid configuration, malformed inputs, or violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace numalab
