#pragma once

#include <stdexcept>
#include <string>

namespace sdrsim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An immediate or register field does not fit its encoding.
struct RangeError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace sdrsim
