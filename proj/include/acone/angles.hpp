#pragma once

#include <cmath>
#include <numbers>

namespace acone {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Absolute tolerance for comparing angles in the exact cone algebra.
inline constexpr double kAngleTol = 1e-9;

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  if (a >= -kPi && a < kPi) return a;
  double w = std::fmod(a + kPi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  w -= kPi;
  if (w >= kPi) w -= kTwoPi;
  return w;
}

/// Wraps an angle into [0, 2pi).
inline double wrap_positive(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w -= kTwoPi;
  return w;
}

/// Distance from `a` to the nearest multiple of 2pi, in [0, pi].
inline double distance_to_full_turn(double a) { return std::abs(wrap_angle(a)); }

/// Shortest signed angular difference a - b, in [-pi, pi).
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

}  // namespace acone
