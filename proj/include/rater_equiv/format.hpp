#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace rater_equiv::fmt {

inline double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::copysign(std::floor(std::abs(value) * scale + 0.5) / scale, value);
}

// Fixed-point with half-away-from-zero rounding; "-0.00" is printed as "0.00".
inline std::string fixed(double value, int decimals = 2) {
  if (!std::isfinite(value)) return "nan";
  double rounded = round_half_away(value, decimals);
  if (rounded == 0.0) rounded = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

// p-values as a 2-decimal mantissa and 2-digit exponent, e.g. 2.11e-09.
inline std::string scientific(double value) {
  if (!std::isfinite(value)) return "nan";
  if (value == 0.0) return "0.00e+00";
  int exponent = static_cast<int>(std::floor(std::log10(std::abs(value))));
  double mantissa = round_half_away(value / std::pow(10.0, exponent), 2);
  if (std::abs(mantissa) >= 10.0) {
    mantissa = round_half_away(mantissa / 10.0, 2);
    ++exponent;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2fe%c%02d", mantissa, exponent < 0 ? '-' : '+', std::abs(exponent));
  return buf;
}

inline std::string passed_fraction(double passed) { return fixed(passed, 2) + "/9"; }

}  // namespace rater_equiv::fmt
