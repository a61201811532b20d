#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace channeldiff {

// Speed of light in vacuum, m/s.
inline constexpr double kSpeedOfLight = 299792458.0;

inline double wavelength(double f_c_hz) { return kSpeedOfLight / f_c_hz; }

inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace channeldiff
