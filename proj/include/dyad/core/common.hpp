#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dyad {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy, mapped by the CLI to exit codes:
//   UsageError -> 1, DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : Error {
  using Error::Error;
};

// Malformed or inconsistent inputs: shape mismatches, bad files,
// missing upstream artifacts, insufficient data.
struct DataError : Error {
  using Error::Error;
};

// Non-finite values where finiteness is a contract (losses, gradients).
struct NumericError : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError(what + " is not finite");
}

}  // namespace dyad
