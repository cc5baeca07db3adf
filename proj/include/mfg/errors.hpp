#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : ValidationError {
  using ValidationError::ValidationError;
};

struct CapacityError : ValidationError {
  using ValidationError::ValidationError;
};

// Bad or inconsistent run parameters (CFL violations, schema problems).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The discretization broke one of its own guarantees (negativity, Peclet).
struct SchemeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StalenessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mfg
