#pragma once

// Exact cones, multicones, and rotations on the unit circle.
//
// A cone C(alpha, beta) is the closed arc of unit complex numbers whose
// argument lies in [alpha, beta] modulo 2pi. Multicones are finite unions of
// cones kept in a canonical form so that equal regions compare equal.

#include <algorithm>
#include <initializer_list>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "acone/angles.hpp"

namespace acone {

enum class ConeClass { Empty, Singleton, Proper, Full };

struct Cone {
  double alpha = 0.0;
  double beta = 0.0;

  double axis() const { return 0.5 * (alpha + beta); }
  double aperture() const { return beta - alpha; }

  static Cone from_axis(double axis, double aperture) {
    return {axis - 0.5 * aperture, axis + 0.5 * aperture};
  }
};

inline ConeClass classify(const Cone& c, double tol = kAngleTol) {
  if (c.alpha > c.beta + tol) return ConeClass::Empty;
  if (std::abs(c.alpha - c.beta) <= tol) return ConeClass::Singleton;
  if (c.alpha + kTwoPi <= c.beta + tol) return ConeClass::Full;
  return ConeClass::Proper;
}

/// True iff some theta + 2k*pi lies in [alpha, beta].
inline bool contains(const Cone& c, double theta, double tol = kAngleTol) {
  switch (classify(c, tol)) {
    case ConeClass::Empty:
      return false;
    case ConeClass::Full:
      return true;
    default:
      break;
  }
  const double offset = wrap_positive(theta - c.alpha);
  return offset <= c.aperture() + tol || offset >= kTwoPi - tol;
}

namespace detail {

// A closed interval on the line [-pi, pi]; multicone regions are handled as
// sorted disjoint piece lists where -pi and pi denote the same point.
struct Piece {
  double lo;
  double hi;
};

inline void append_arc(std::vector<Piece>& out, double lo, double width) {
  const double hi = lo + width;
  if (hi <= kPi) {
    out.push_back({lo, hi});
  } else {
    out.push_back({lo, kPi});
    out.push_back({-kPi, hi - kTwoPi});
  }
}

inline std::vector<Piece> merge_pieces(std::vector<Piece> pieces, double tol) {
  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& a, const Piece& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  std::vector<Piece> merged;
  for (const Piece& p : pieces) {
    if (!merged.empty() && p.lo <= merged.back().hi + tol) {
      merged.back().hi = std::max(merged.back().hi, p.hi);
    } else {
      merged.push_back(p);
    }
  }
  return merged;
}

}  // namespace detail

/// Finite union of cones in canonical form: disjoint arcs sorted by lower
/// boundary, each lower boundary in [-pi, pi), no empty members. The full
/// region is the single cone C(-pi, pi).
class Multicone {
 public:
  Multicone() = default;
  Multicone(std::initializer_list<Cone> cones) : Multicone(std::span<const Cone>(cones.begin(), cones.size())) {}
  explicit Multicone(std::span<const Cone> cones, double tol = kAngleTol) { canonicalize(cones, tol); }
  explicit Multicone(const std::vector<Cone>& cones, double tol = kAngleTol)
      : Multicone(std::span<const Cone>(cones), tol) {}

  static Multicone empty() { return {}; }
  static Multicone full() {
    Multicone m;
    m.cones_.push_back({-kPi, kPi});
    return m;
  }

  const std::vector<Cone>& cones() const { return cones_; }
  bool is_empty() const { return cones_.empty(); }
  bool is_full() const { return cones_.size() == 1 && classify(cones_.front()) == ConeClass::Full; }

  bool contains(double theta, double tol = kAngleTol) const {
    return std::any_of(cones_.begin(), cones_.end(),
                       [&](const Cone& c) { return acone::contains(c, theta, tol); });
  }

  /// Region as sorted disjoint pieces of [-pi, pi]. A region touching pi also
  /// carries a degenerate piece at -pi (and vice versa) so that line-based
  /// set operations see the identified endpoint on both sides.
  std::vector<detail::Piece> pieces(double tol = kAngleTol) const {
    std::vector<detail::Piece> out;
    if (is_full()) {
      out.push_back({-kPi, kPi});
      return out;
    }
    for (const Cone& c : cones_) detail::append_arc(out, c.alpha, c.aperture());
    out = detail::merge_pieces(std::move(out), tol);
    if (out.empty()) return out;
    const bool at_low = out.front().lo <= -kPi + tol;
    const bool at_high = out.back().hi >= kPi - tol;
    if (at_high && !at_low) out.insert(out.begin(), detail::Piece{-kPi, -kPi});
    if (at_low && !at_high) out.push_back({kPi, kPi});
    return out;
  }

  bool approx_equal(const Multicone& other, double tol = kAngleTol) const {
    if (cones_.size() != other.cones_.size()) return false;
    for (std::size_t i = 0; i < cones_.size(); ++i) {
      if (std::abs(cones_[i].alpha - other.cones_[i].alpha) > tol) return false;
      if (std::abs(cones_[i].beta - other.cones_[i].beta) > tol) return false;
    }
    return true;
  }

  friend bool operator==(const Multicone& a, const Multicone& b) { return a.approx_equal(b); }

 private:
  void canonicalize(std::span<const Cone> input, double tol) {
    std::vector<detail::Piece> raw;
    for (const Cone& c : input) {
      switch (classify(c, tol)) {
        case ConeClass::Empty:
          continue;
        case ConeClass::Full:
          *this = full();
          return;
        case ConeClass::Singleton:
          detail::append_arc(raw, wrap_angle(c.alpha), 0.0);
          break;
        case ConeClass::Proper:
          detail::append_arc(raw, wrap_angle(c.alpha), std::max(0.0, c.aperture()));
          break;
      }
    }
    std::vector<detail::Piece> merged = detail::merge_pieces(std::move(raw), tol);
    if (merged.empty()) return;
    if (merged.size() == 1 && merged.front().lo <= -kPi + tol && merged.front().hi >= kPi - tol) {
      *this = full();
      return;
    }
    if (merged.size() >= 2 && merged.front().lo <= -kPi + tol && merged.back().hi >= kPi - tol) {
      // Join the piece ending at pi with the one starting at -pi.
      const detail::Piece first = merged.front();
      merged.erase(merged.begin());
      merged.back().hi = first.hi + kTwoPi;
      if (merged.back().hi - merged.back().lo >= kTwoPi - tol) {
        *this = full();
        return;
      }
    }
    cones_.reserve(merged.size());
    for (const detail::Piece& p : merged) {
      double lo = p.lo;
      double hi = p.hi;
      if (lo >= kPi - tol && hi - lo <= tol) {
        lo = -kPi;
        hi = -kPi;
      }
      cones_.push_back({lo, hi});
    }
  }

  std::vector<Cone> cones_;
};

inline Multicone unite(const Multicone& a, const Multicone& b) {
  std::vector<Cone> all = a.cones();
  all.insert(all.end(), b.cones().begin(), b.cones().end());
  return Multicone(all);
}

inline Multicone intersect(const Multicone& a, const Multicone& b, double tol = kAngleTol) {
  const auto pa = a.pieces(tol);
  const auto pb = b.pieces(tol);
  std::vector<Cone> out;
  for (const auto& x : pa) {
    for (const auto& y : pb) {
      const double lo = std::max(x.lo, y.lo);
      const double hi = std::min(x.hi, y.hi);
      if (lo <= hi + tol) out.push_back({lo, std::max(lo, hi)});
    }
  }
  return Multicone(out, tol);
}

/// Closure of the complement: boundary points belong to both sides.
inline Multicone complement(const Multicone& a, double tol = kAngleTol) {
  if (a.is_empty()) return Multicone::full();
  if (a.is_full()) return Multicone::empty();
  std::vector<Cone> gaps;
  double cursor = -kPi;
  for (const auto& p : a.pieces(tol)) {
    if (p.lo > cursor + tol) gaps.push_back({cursor, p.lo});
    cursor = std::max(cursor, p.hi);
  }
  if (kPi > cursor + tol) gaps.push_back({cursor, kPi});
  return Multicone(gaps, tol);
}

inline bool is_subset(const Multicone& a, const Multicone& b, double tol = kAngleTol) {
  const auto pb = b.pieces(tol);
  for (const auto& x : a.pieces(tol)) {
    const bool covered = std::any_of(pb.begin(), pb.end(), [&](const detail::Piece& y) {
      return y.lo <= x.lo + tol && x.hi <= y.hi + tol;
    });
    if (!covered) return false;
  }
  return true;
}

/// Rotation R(theta, gamma, delta): shifts the cone axis by theta and maps the
/// aperture a to gamma * a + delta.
struct Rotation {
  double theta = 0.0;
  double gamma = 1.0;
  double delta = 0.0;
};

inline Cone rotate(const Rotation& r, const Cone& c) {
  if (r.gamma < 0.0) throw std::invalid_argument("rotation aperture factor must be non-negative");
  const ConeClass kind = classify(c);
  if (kind == ConeClass::Empty || kind == ConeClass::Full) return c;
  const double aperture = kind == ConeClass::Singleton ? 0.0 : c.aperture();
  const double axis = wrap_angle(c.axis() + r.theta);
  const double out = std::clamp(r.gamma * aperture + r.delta, 0.0, kTwoPi);
  return Cone::from_axis(axis, out);
}

inline Multicone rotate(const Rotation& r, const Multicone& m) {
  std::vector<Cone> members;
  members.reserve(m.cones().size());
  for (const Cone& c : m.cones()) members.push_back(rotate(r, c));
  return Multicone(members);
}

/// Rotation with the action of applying `first` and then `second`.
inline Rotation compose(const Rotation& first, const Rotation& second) {
  return {first.theta + second.theta, first.gamma * second.gamma, second.gamma * first.delta + second.delta};
}

/// Functional inverse of the unclamped action, R(-theta, 1/gamma, -delta/gamma).
/// For aperture-additive rotations (gamma = 1) this is R(-theta, 1, -delta).
inline Rotation inverse(const Rotation& r) {
  if (r.gamma <= 0.0) throw std::invalid_argument("rotation with zero aperture factor has no inverse");
  return {-r.theta, 1.0 / r.gamma, -r.delta / r.gamma};
}

/// Debug rendering with nine decimals, e.g. `MC[(0.000000000,1.570796327)]`.
inline std::string format_multicone(const Multicone& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(9) << "MC[";
  bool first = true;
  for (const Cone& c : m.cones()) {
    if (!first) os << ';';
    first = false;
    os << '(' << c.alpha << ',' << c.beta << ')';
  }
  os << ']';
  return os.str();
}

}  // namespace acone
