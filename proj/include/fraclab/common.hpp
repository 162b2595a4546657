#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

inline constexpr const char* kToolVersion = "0.1.0";

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError -> 2, DataError -> 3, NumericsError -> 4, TelemetryError -> 5.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, divergence, overflow.
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Not enough logged points to run an analysis.
struct TelemetryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fraclab
