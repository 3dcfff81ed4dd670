#pragma once

#include <stdexcept>
#include <string>

namespace camco {

// Error taxonomy used across the library. Each maps onto one of the
// failure classes named in the module contracts; callers that only care
// about "something went wrong" can catch std::exception.

struct InvalidCalibration : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidDesign : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace camco
