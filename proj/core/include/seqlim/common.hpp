#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace seqlim {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Raised when an experiment configuration is malformed. The CLI maps it to
/// exit code 2 and includes the offending field path in the message.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure leaves its validity regime (singular
/// densities, exhausted horizons, out-of-radius twists, underflow). Exit 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on misuse of an API contract (bad index, basis mismatch).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqlim
