#pragma once

// Sufficient conditions on rotation parameters for relation axioms to hold in
// a multicone embedding, plus the exact per-coordinate rotor identities used
// for symmetry, inverse and composition.
//
// All angle comparisons are modulo 2pi: a difference of axis angles is first
// wrapped into [-pi, pi).

#include <cmath>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "acone/angles.hpp"
#include "acone/cone_algebra.hpp"

namespace acone {

enum class PatternKind { Containment, Composition, Transitivity, Inverse, Symmetry, Asymmetry };

inline std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::Containment: return "containment";
    case PatternKind::Composition: return "composition";
    case PatternKind::Transitivity: return "transitivity";
    case PatternKind::Inverse: return "inverse";
    case PatternKind::Symmetry: return "symmetry";
    case PatternKind::Asymmetry: return "asymmetry";
  }
  return "unknown";
}

/// Outcome of a condition check. `margin` is the signed slack of the tightest
/// inequality; the condition holds iff margin >= -tolerance.
struct ConditionReport {
  PatternKind kind;
  bool holds;
  double margin;
};

inline constexpr double kConditionTol = 1e-9;
inline constexpr double kLemmaTol = 1e-6;

namespace detail {

inline ConditionReport report(PatternKind kind, double margin, double tol) { return {kind, margin >= -tol, margin}; }

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail

/// Which form of the composition conditions to evaluate.
///  - Derived: obtained by composing the two rotations and applying the
///    matching containment condition. This form is sound.
///  - WindowTheta3: window |t3 - (t1 + t2)| <= d3 - (d1 + d2).
///  - WindowTheta2: the literal |t2 - (t1 + t2)| <= d3 - (d1 + d2).
/// For the multiplicative form both window readings mean: shared axis
/// angle and d1 + d2 <= d3.
enum class CompositionReading { Derived, WindowTheta3, WindowTheta2 };

/// R(t1, 1, d1) contained in R(t2, 1, d2): the image arc of r lies inside the
/// image arc of s for every cone.
inline ConditionReport containment_additive(const Rotation& r, const Rotation& s, double tol = kConditionTol) {
  detail::require(std::abs(r.gamma - 1.0) <= tol && std::abs(s.gamma - 1.0) <= tol,
                  "containment_additive requires aperture-additive rotations (gamma = 1)");
  const double shift = angle_diff(s.theta, r.theta);
  const double upper = shift + 0.5 * s.delta - 0.5 * r.delta;
  const double lower = -shift + 0.5 * s.delta - 0.5 * r.delta;
  return detail::report(PatternKind::Containment, std::min(upper, lower), tol);
}

inline ConditionReport containment_multiplicative(const Rotation& r, const Rotation& s,
                                                  double tol = kConditionTol) {
  detail::require(std::abs(angle_diff(r.theta, s.theta)) <= tol,
                  "containment_multiplicative requires equal rotation angles");
  return detail::report(PatternKind::Containment, std::min(s.gamma - r.gamma, s.delta - r.delta), tol);
}

/// r1 o r2 contained in r3 for aperture-additive rotations with non-negative
/// aperture adding.
inline ConditionReport composition_additive(const Rotation& r1, const Rotation& r2, const Rotation& r3,
                                            double tol = kConditionTol,
                                            CompositionReading reading = CompositionReading::Derived) {
  for (const Rotation* r : {&r1, &r2, &r3}) {
    detail::require(std::abs(r->gamma - 1.0) <= tol, "composition_additive requires gamma = 1");
    detail::require(r->delta >= -tol, "composition_additive requires non-negative aperture adding");
  }
  const double slack = r3.delta - (r1.delta + r2.delta);
  double margin = 0.0;
  switch (reading) {
    case CompositionReading::Derived:
      margin = 0.5 * slack - std::abs(angle_diff(r3.theta, r1.theta + r2.theta));
      break;
    case CompositionReading::WindowTheta3:
      margin = slack - std::abs(angle_diff(r3.theta, r1.theta + r2.theta));
      break;
    case CompositionReading::WindowTheta2:
      margin = slack - std::abs(angle_diff(r2.theta, r1.theta + r2.theta));
      break;
  }
  return detail::report(PatternKind::Composition, margin, tol);
}

inline ConditionReport composition_multiplicative(const Rotation& r1, const Rotation& r2, const Rotation& r3,
                                                  double tol = kConditionTol,
                                                  CompositionReading reading = CompositionReading::Derived) {
  detail::require(r1.delta >= -tol && r2.delta >= -tol,
                  "composition_multiplicative requires non-negative aperture adding");
  if (reading == CompositionReading::Derived) {
    // The composed action is R(t1 + t2, g1 g2, g2 d1 + d2); its axis must match r3.
    const double axis_slack = -std::abs(angle_diff(r3.theta, r1.theta + r2.theta));
    const double margin = std::min({r3.gamma - r1.gamma * r2.gamma, r3.delta - (r2.gamma * r1.delta + r2.delta),
                                    axis_slack});
    return detail::report(PatternKind::Composition, margin, tol);
  }
  detail::require(std::abs(angle_diff(r1.theta, r2.theta)) <= tol && std::abs(angle_diff(r2.theta, r3.theta)) <= tol,
                  "window form of multiplicative composition requires a shared rotation angle");
  const double margin = std::min(r3.gamma - r1.gamma * r2.gamma, r3.delta - (r1.delta + r2.delta));
  return detail::report(PatternKind::Composition, margin, tol);
}

/// Trans(r) as r o r contained in r.
inline ConditionReport transitivity(const Rotation& r, double tol = kConditionTol) {
  ConditionReport out{PatternKind::Transitivity, false, r.delta};
  if (r.delta < -tol) return out;
  out = std::abs(r.gamma - 1.0) <= tol ? composition_additive(r, r, r, tol) : composition_multiplicative(r, r, r, tol);
  out.kind = PatternKind::Transitivity;
  return out;
}

/// Symmetry window: some multiple of 2pi lies within (gamma + 1) * delta / 2
/// of 2 * theta. Requires gamma >= 1 and delta >= 0.
inline ConditionReport symmetry(const Rotation& r, double tol = kConditionTol) {
  detail::require(r.gamma >= 1.0 - tol, "symmetry condition requires gamma >= 1");
  detail::require(r.delta >= -tol, "symmetry condition requires delta >= 0");
  const double window = 0.5 * (r.gamma + 1.0) * r.delta;
  return detail::report(PatternKind::Symmetry, window - distance_to_full_turn(2.0 * r.theta), tol);
}

/// Strict violation of the symmetry window. Holds iff margin > 0; for singleton
/// (entity) cones this rules out any pair (a, b), (b, a) both being predicted.
inline ConditionReport asymmetry(const Rotation& r) {
  const ConditionReport sym = symmetry(r, 0.0);
  return {PatternKind::Asymmetry, sym.margin < 0.0, -sym.margin};
}

/// Upper and lower boundary rotor angles of a cone-shaped relation embedding.
struct BoundaryAngles {
  std::vector<double> upper;
  std::vector<double> lower;
};

inline BoundaryAngles boundary_angles(std::span<const double> axis, std::span<const double> aperture) {
  detail::require(axis.size() == aperture.size(), "axis/aperture length mismatch");
  BoundaryAngles b;
  b.upper.resize(axis.size());
  b.lower.resize(axis.size());
  for (std::size_t j = 0; j < axis.size(); ++j) {
    b.upper[j] = axis[j] + 0.5 * aperture[j];
    b.lower[j] = axis[j] - 0.5 * aperture[j];
  }
  return b;
}

/// Per coordinate: r o r = 1 for both boundary rotors.
inline std::vector<bool> exact_symmetry(std::span<const double> upper, std::span<const double> lower,
                                        double tol = kLemmaTol) {
  detail::require(upper.size() == lower.size(), "exact_symmetry: length mismatch");
  std::vector<bool> out(upper.size());
  for (std::size_t j = 0; j < upper.size(); ++j) {
    out[j] = distance_to_full_turn(2.0 * upper[j]) <= tol && distance_to_full_turn(2.0 * lower[j]) <= tol;
  }
  return out;
}

/// Per coordinate: r2 o r1 = 1 for both boundary rotors.
inline std::vector<bool> exact_inverse(std::span<const double> upper1, std::span<const double> lower1,
                                       std::span<const double> upper2, std::span<const double> lower2,
                                       double tol = kLemmaTol) {
  const std::size_t n = upper1.size();
  detail::require(lower1.size() == n && upper2.size() == n && lower2.size() == n, "exact_inverse: length mismatch");
  std::vector<bool> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = distance_to_full_turn(upper1[j] + upper2[j]) <= tol && distance_to_full_turn(lower1[j] + lower2[j]) <= tol;
  }
  return out;
}

/// Per coordinate: r1 o r2 = r3 for both boundary rotors.
inline std::vector<bool> exact_composition(std::span<const double> upper1, std::span<const double> upper2,
                                           std::span<const double> upper3, std::span<const double> lower1,
                                           std::span<const double> lower2, std::span<const double> lower3,
                                           double tol = kLemmaTol) {
  const std::size_t n = upper1.size();
  detail::require(upper2.size() == n && upper3.size() == n && lower1.size() == n && lower2.size() == n &&
                      lower3.size() == n,
                  "exact_composition: length mismatch");
  std::vector<bool> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = distance_to_full_turn(upper1[j] + upper2[j] - upper3[j]) <= tol &&
             distance_to_full_turn(lower1[j] + lower2[j] - lower3[j]) <= tol;
  }
  return out;
}

}  // namespace acone
