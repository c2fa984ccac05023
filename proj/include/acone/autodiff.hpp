#pragma once

// Minimal tape-based reverse-mode differentiation over dense row-major
// matrices of doubles.
//
// Nodes are appended to a Tape in evaluation order, so reverse creation order
// is a valid reverse topological order. Gradients of leaves bound to external
// storage (parameters, gathered table rows) are accumulated additively into a
// caller-provided sink, which lets several tapes run side by side against one
// read-only parameter snapshot.
//
// Subgradient conventions: |x| at 0 -> 0; min ties -> first argument; clamp
// outside [lo, hi] -> 0 (inside, including the bounds, -> 1); relu at 0 -> 0;
// angle wrapping -> identity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "acone/angles.hpp"

namespace acone::ad {

struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  inline Shape shape() const;
  inline const std::vector<double>& value() const;
  inline const std::vector<double>& grad() const;
  inline double item() const;
  double operator[](std::size_t i) const { return value()[i]; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Shape shape, std::vector<double> values) {
    check_size(shape, values.size());
    return push(shape, std::move(values), false, {});
  }
  Var constant(double v) { return constant({1, 1}, {v}); }
  Var filled(Shape shape, double v) { return constant(shape, std::vector<double>(shape.size(), v)); }

  /// Leaf whose gradient is read back through Var::grad().
  Var variable(Shape shape, std::vector<double> values) {
    check_size(shape, values.size());
    return push(shape, std::move(values), true, {});
  }

  /// Leaf copied from external storage; backward adds its gradient into `sink`
  /// (skipped when `sink` is empty).
  Var parameter(Shape shape, std::span<const double> values, std::span<double> sink) {
    check_size(shape, values.size());
    std::vector<double> v(values.begin(), values.end());
    if (sink.empty()) return push(shape, std::move(v), false, {});
    if (sink.size() != values.size()) throw std::invalid_argument("parameter sink size mismatch");
    return push(shape, std::move(v), true, [sink](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      for (std::size_t i = 0; i < g.size(); ++i) sink[i] += g[i];
    });
  }

  /// Rows `rows` of a row-major table with `cols` columns; backward
  /// scatter-adds into the matching rows of `sink`.
  Var gather_rows(std::span<const double> table, std::size_t cols, std::span<const std::size_t> rows,
                  std::span<double> sink) {
    std::vector<double> v(rows.size() * cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if ((rows[r] + 1) * cols > table.size()) throw std::out_of_range("gather_rows: row index out of range");
      std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(rows[r] * cols), cols,
                  v.begin() + static_cast<std::ptrdiff_t>(r * cols));
    }
    const Shape shape{rows.size(), cols};
    if (sink.empty()) return push(shape, std::move(v), false, {});
    if (sink.size() != table.size()) throw std::invalid_argument("gather_rows sink size mismatch");
    std::vector<std::size_t> ids(rows.begin(), rows.end());
    return push(shape, std::move(v), true, [sink, ids = std::move(ids), cols](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) sink[ids[r] * cols + c] += g[r * cols + c];
      }
    });
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates in reverse creation order.
  void backward(const Var& loss) {
    if (loss.shape().size() != 1) throw std::invalid_argument("backward requires a scalar loss, got " + to_string(loss.shape()));
    Node& root = nodes_[loss.id()];
    if (!root.requires_grad) return;
    ensure_grad(loss.id());
    root.grad[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // Node access for operator implementations.
  const std::vector<double>& value_of(std::size_t id) const { return nodes_[id].value; }
  const std::vector<double>& grad_of(std::size_t id) const { return nodes_[id].grad; }
  Shape shape_of(std::size_t id) const { return nodes_[id].shape; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of `id`, allocated on first use; nullptr if the node does
  /// not take gradients.
  double* grad_sink(std::size_t id) {
    if (!nodes_[id].requires_grad) return nullptr;
    ensure_grad(id);
    return nodes_[id].grad.data();
  }

  Var push(Shape shape, std::vector<double> value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{shape, std::move(value), {}, std::move(backward), requires_grad});
    return {this, nodes_.size() - 1};
  }

  template <class... Vars>
  bool any_requires_grad(const Vars&... vs) const {
    return (nodes_[vs.id()].requires_grad || ...);
  }

  /// When enabled, non-smooth ops (abs, relu, clamp, minimum, min) record the
  /// distance of their arguments to the nearest switching point. Exact zeros
  /// are skipped: they come from identical operands (a tie with itself, a
  /// nominal cone's zero aperture), which stay tied under any perturbation.
  void track_kinks(bool on) { track_kinks_ = on; }
  bool tracking_kinks() const { return track_kinks_; }
  void note_kink(double distance) {
    if (distance != 0.0) kink_margin_ = std::min(kink_margin_, std::abs(distance));
  }
  double kink_margin() const { return kink_margin_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
    bool requires_grad = false;
  };

  static void check_size(Shape shape, std::size_t n) {
    if (shape.size() != n) throw std::invalid_argument("value count does not match shape " + to_string(shape));
  }

  void ensure_grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  }

  std::deque<Node> nodes_;
  bool track_kinks_ = false;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

inline Shape Var::shape() const { return tape_->shape_of(id_); }
inline const std::vector<double>& Var::value() const { return tape_->value_of(id_); }
inline const std::vector<double>& Var::grad() const { return tape_->grad_of(id_); }
inline double Var::item() const {
  if (shape().size() != 1) throw std::invalid_argument("item() on non-scalar " + to_string(shape()));
  return value()[0];
}

namespace detail {

inline void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

inline void same_shape(const Var& a, const Var& b, const char* op) {
  same_tape(a, b);
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
}

// Elementwise unary op; `df(x, y)` is the derivative given input and output.
template <class F, class DF>
Var unary(const Var& a, F f, DF df) {
  Tape& t = a.tape();
  const auto& x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  if (!t.requires_grad(a.id())) return t.push(a.shape(), std::move(y), false, {});
  return t.push(a.shape(), std::move(y), true, [ai = a.id(), df](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    const auto& xs = tp.value_of(ai);
    const auto& ys = tp.value_of(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(xs[i], ys[i]);
  });
}

// Elementwise binary op on equal shapes; `da`, `db` are partial derivatives
// given (x, y, out).
template <class F, class DA, class DB>
Var binary(const Var& a, const Var& b, const char* name, F f, DA da, DB db) {
  same_shape(a, b, name);
  Tape& t = a.tape();
  const auto& x = a.value();
  const auto& z = b.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i], z[i]);
  if (!t.any_requires_grad(a, b)) return t.push(a.shape(), std::move(y), false, {});
  return t.push(a.shape(), std::move(y), true, [ai = a.id(), bi = b.id(), da, db](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_of(self);
    const auto& xs = tp.value_of(ai);
    const auto& zs = tp.value_of(bi);
    const auto& ys = tp.value_of(self);
    if (double* ga = tp.grad_sink(ai)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(xs[i], zs[i], ys[i]);
    }
    if (double* gb = tp.grad_sink(bi)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(xs[i], zs[i], ys[i]);
    }
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---- elementwise arithmetic -------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "add", [](double x, double z) { return x + z; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "sub", [](double x, double z) { return x - z; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "mul", [](double x, double z) { return x * z; }, [](double, double z, double) { return z; },
      [](double x, double, double) { return x; });
}

inline Var operator*(const Var& a, double s) {
  return detail::unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}
inline Var operator*(double s, const Var& a) { return a * s; }

inline Var operator+(const Var& a, double s) {
  return detail::unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}
inline Var operator+(double s, const Var& a) { return a + s; }
inline Var operator-(const Var& a, double s) { return a + (-s); }

inline Var operator-(const Var& a) { return a * -1.0; }
inline Var operator-(double s, const Var& a) { return (-a) + s; }

/// Elementwise quotient; a zero divisor is a domain error.
inline Var operator/(const Var& a, const Var& b) {
  for (double z : b.value()) {
    if (z == 0.0) throw std::domain_error("division by zero");
  }
  return detail::binary(
      a, b, "div", [](double x, double z) { return x / z; }, [](double, double z, double) { return 1.0 / z; },
      [](double, double z, double y) { return -y / z; });
}

/// Elementwise minimum; ties send the gradient to `a`.
inline Var minimum(const Var& a, const Var& b) {
  if (a.tape().tracking_kinks() && a.shape() == b.shape()) {
    for (std::size_t i = 0; i < a.value().size(); ++i) a.tape().note_kink(a.value()[i] - b.value()[i]);
  }
  return detail::binary(
      a, b, "minimum", [](double x, double z) { return x <= z ? x : z; },
      [](double x, double z, double) { return x <= z ? 1.0 : 0.0; },
      [](double x, double z, double) { return x <= z ? 0.0 : 1.0; });
}

inline Var atan2(const Var& y, const Var& x) {
  return detail::binary(
      y, x, "atan2", [](double yy, double xx) { return std::atan2(yy, xx); },
      [](double yy, double xx, double) {
        const double r2 = xx * xx + yy * yy;
        return r2 > 0.0 ? xx / r2 : 0.0;
      },
      [](double yy, double xx, double) {
        const double r2 = xx * xx + yy * yy;
        return r2 > 0.0 ? -yy / r2 : 0.0;
      });
}

// ---- elementwise functions --------------------------------------------------

inline Var sin(const Var& a) {
  return detail::unary(
      a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

inline Var cos(const Var& a) {
  return detail::unary(
      a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

namespace detail {

inline void note_kinks(const Var& a, double at) {
  if (!a.tape().tracking_kinks()) return;
  for (double x : a.value()) a.tape().note_kink(x - at);
}

}  // namespace detail

inline Var abs(const Var& a) {
  detail::note_kinks(a, 0.0);
  return detail::unary(
      a, [](double x) { return std::abs(x); }, [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Var relu(const Var& a) {
  detail::note_kinks(a, 0.0);
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var exp(const Var& a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var sigmoid(const Var& a) {
  return detail::unary(
      a, [](double x) { return detail::stable_sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

/// log(sigmoid(x)) without overflow for large |x|.
inline Var log_sigmoid(const Var& a) {
  return detail::unary(
      a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return detail::stable_sigmoid(-x); });
}

/// Natural log; non-positive inputs are a domain error.
inline Var log(const Var& a) {
  for (double x : a.value()) {
    if (!(x > 0.0)) throw std::domain_error("log of non-positive value");
  }
  return detail::unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var clamp(const Var& a, double lo, double hi) {
  detail::note_kinks(a, lo);
  detail::note_kinks(a, hi);
  return detail::unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

/// Wraps angles into [-pi, pi); the gradient is the identity.
inline Var wrap_angle(const Var& a) {
  return detail::unary(
      a, [](double x) { return acone::wrap_angle(x); }, [](double, double) { return 1.0; });
}

// ---- reductions -------------------------------------------------------------

inline Var sum(const Var& a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double x : a.value()) s += x;
  if (!t.requires_grad(a.id())) return t.push({1, 1}, {s}, false, {});
  return t.push({1, 1}, {s}, true, [ai = a.id()](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const double g = tp.grad_of(self)[0];
    const std::size_t n = tp.value_of(ai).size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

inline Var mean(const Var& a) { return sum(a) * (1.0 / static_cast<double>(a.shape().size())); }

/// Sum along `axis`: 0 collapses rows (result 1 x cols), 1 collapses columns
/// (result rows x 1).
inline Var sum(const Var& a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("sum: axis must be 0 or 1");
  Tape& t = a.tape();
  const Shape s = a.shape();
  const Shape out_shape = axis == 0 ? Shape{1, s.cols} : Shape{s.rows, 1};
  std::vector<double> out(out_shape.size(), 0.0);
  const auto& x = a.value();
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) out[axis == 0 ? c : r] += x[r * s.cols + c];
  }
  if (!t.requires_grad(a.id())) return t.push(out_shape, std::move(out), false, {});
  return t.push(out_shape, std::move(out), true, [ai = a.id(), s, axis](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t c = 0; c < s.cols; ++c) ga[r * s.cols + c] += g[axis == 0 ? c : r];
    }
  });
}

inline Var mean(const Var& a, int axis) {
  const Shape s = a.shape();
  return sum(a, axis) * (1.0 / static_cast<double>(axis == 0 ? s.rows : s.cols));
}

/// Minimum over all elements; ties resolve to the first index.
inline Var min(const Var& a) {
  Tape& t = a.tape();
  const auto& x = a.value();
  if (x.empty()) throw std::invalid_argument("min of empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] < x[best]) best = i;
  }
  if (t.tracking_kinks()) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != best) t.note_kink(x[i] - x[best]);
    }
  }
  if (!t.requires_grad(a.id())) return t.push({1, 1}, {x[best]}, false, {});
  return t.push({1, 1}, {x[best]}, true, [ai = a.id(), best](Tape& tp, std::size_t self) {
    tp.grad_sink(ai)[best] += tp.grad_of(self)[0];
  });
}

/// Minimum along `axis` (0: over rows per column, 1: over columns per row).
inline Var min(const Var& a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("min: axis must be 0 or 1");
  Tape& t = a.tape();
  const Shape s = a.shape();
  const Shape out_shape = axis == 0 ? Shape{1, s.cols} : Shape{s.rows, 1};
  const auto& x = a.value();
  std::vector<std::size_t> arg(out_shape.size(), std::numeric_limits<std::size_t>::max());
  std::vector<double> out(out_shape.size());
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t c = 0; c < s.cols; ++c) {
      const std::size_t o = axis == 0 ? c : r;
      const std::size_t i = r * s.cols + c;
      if (arg[o] == std::numeric_limits<std::size_t>::max() || x[i] < out[o]) {
        arg[o] = i;
        out[o] = x[i];
      }
    }
  }
  if (t.tracking_kinks()) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t o = axis == 0 ? i % s.cols : i / s.cols;
      if (i != arg[o]) t.note_kink(x[i] - out[o]);
    }
  }
  if (!t.requires_grad(a.id())) return t.push(out_shape, std::move(out), false, {});
  return t.push(out_shape, std::move(out), true, [ai = a.id(), arg = std::move(arg)](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    for (std::size_t o = 0; o < g.size(); ++o) ga[arg[o]] += g[o];
  });
}

/// Softmax along `axis` (0: each column normalised over rows).
inline Var softmax(const Var& a, int axis = 0) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  Tape& t = a.tape();
  const Shape s = a.shape();
  const auto& x = a.value();
  std::vector<double> y(x.size());
  const std::size_t groups = axis == 0 ? s.cols : s.rows;
  const std::size_t len = axis == 0 ? s.rows : s.cols;
  auto index = [s, axis](std::size_t g, std::size_t k) { return axis == 0 ? k * s.cols + g : g * s.cols + k; };
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, x[index(g, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) z += (y[index(g, k)] = std::exp(x[index(g, k)] - mx));
    for (std::size_t k = 0; k < len; ++k) y[index(g, k)] /= z;
  }
  if (!t.requires_grad(a.id())) return t.push(s, std::move(y), false, {});
  return t.push(s, std::move(y), true, [ai = a.id(), groups, len, index](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    const auto& ys = tp.value_of(self);
    for (std::size_t grp = 0; grp < groups; ++grp) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += g[index(grp, k)] * ys[index(grp, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = index(grp, k);
        ga[i] += ys[i] * (g[i] - dot);
      }
    }
  });
}

// ---- linear algebra and layout ------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.cols != sb.rows) {
    throw std::invalid_argument("matmul: inner dimensions differ " + to_string(sa) + " x " + to_string(sb));
  }
  Tape& t = a.tape();
  const auto& x = a.value();
  const auto& w = b.value();
  const std::size_t m = sa.rows, k = sa.cols, n = sb.cols;
  std::vector<double> y(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      const double* wrow = &w[p * n];
      double* yrow = &y[i * n];
      for (std::size_t j = 0; j < n; ++j) yrow[j] += xv * wrow[j];
    }
  }
  if (!t.any_requires_grad(a, b)) return t.push({m, n}, std::move(y), false, {});
  return t.push({m, n}, std::move(y), true, [ai = a.id(), bi = b.id(), m, k, n](Tape& tp, std::size_t self) {
    const auto& g = tp.grad_of(self);
    const auto& xs = tp.value_of(ai);
    const auto& ws = tp.value_of(bi);
    if (double* ga = tp.grad_sink(ai)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * ws[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (double* gb = tp.grad_sink(bi)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = xs[i * k + p];
          if (xv == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += xv * g[i * n + j];
        }
      }
    }
  });
}

/// Repeats a 1 x n row `rows` times.
inline Var broadcast_rows(const Var& a, std::size_t rows) {
  const Shape s = a.shape();
  if (s.rows != 1) throw std::invalid_argument("broadcast_rows expects a single row, got " + to_string(s));
  Tape& t = a.tape();
  std::vector<double> y;
  y.reserve(rows * s.cols);
  for (std::size_t r = 0; r < rows; ++r) y.insert(y.end(), a.value().begin(), a.value().end());
  if (!t.requires_grad(a.id())) return t.push({rows, s.cols}, std::move(y), false, {});
  return t.push({rows, s.cols}, std::move(y), true, [ai = a.id(), rows, cols = s.cols](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) ga[c] += g[r * cols + c];
    }
  });
}

/// Repeats every row `times` times in place: rows r0 r0 .. r1 r1 ..
inline Var repeat_rows(const Var& a, std::size_t times) {
  const Shape s = a.shape();
  Tape& t = a.tape();
  const auto& v = a.value();
  std::vector<double> y;
  y.reserve(s.size() * times);
  for (std::size_t r = 0; r < s.rows; ++r) {
    for (std::size_t k = 0; k < times; ++k) {
      y.insert(y.end(), v.begin() + static_cast<std::ptrdiff_t>(r * s.cols),
               v.begin() + static_cast<std::ptrdiff_t>((r + 1) * s.cols));
    }
  }
  const Shape out{s.rows * times, s.cols};
  if (!t.requires_grad(a.id())) return t.push(out, std::move(y), false, {});
  return t.push(out, std::move(y), true, [ai = a.id(), s, times](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t k = 0; k < times; ++k) {
        const double* src = &g[(r * times + k) * s.cols];
        for (std::size_t c = 0; c < s.cols; ++c) ga[r * s.cols + c] += src[c];
      }
    }
  });
}

/// a (m x n) plus a bias row b (1 x n) added to every row.
inline Var add_bias(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  if (b.shape().rows != 1 || b.shape().cols != a.shape().cols) {
    throw std::invalid_argument("add_bias: bias " + to_string(b.shape()) + " does not fit " + to_string(a.shape()));
  }
  return a + broadcast_rows(b, a.shape().rows);
}

/// Concatenation along `axis` (0: stack rows, 1: append columns).
inline Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of no tensors");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  Tape& t = parts.front().tape();
  const Shape first = parts.front().shape();
  Shape out{axis == 0 ? 0 : first.rows, axis == 0 ? first.cols : 0};
  bool needs = false;
  for (const Var& p : parts) {
    detail::same_tape(parts.front(), p);
    const Shape s = p.shape();
    if (axis == 0 ? s.cols != first.cols : s.rows != first.rows) {
      throw std::invalid_argument("concat: incompatible shapes " + to_string(first) + " and " + to_string(s));
    }
    (axis == 0 ? out.rows : out.cols) += axis == 0 ? s.rows : s.cols;
    needs = needs || t.requires_grad(p.id());
  }
  std::vector<double> y(out.size());
  std::vector<std::size_t> ids;
  std::vector<Shape> shapes;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Shape s = p.shape();
    const auto& v = p.value();
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t c = 0; c < s.cols; ++c) {
        const std::size_t dst = axis == 0 ? (offset + r) * out.cols + c : r * out.cols + offset + c;
        y[dst] = v[r * s.cols + c];
      }
    }
    offset += axis == 0 ? s.rows : s.cols;
    ids.push_back(p.id());
    shapes.push_back(s);
  }
  if (!needs) return t.push(out, std::move(y), false, {});
  return t.push(out, std::move(y), true,
                [ids = std::move(ids), shapes = std::move(shapes), out, axis](Tape& tp, std::size_t self) {
                  const auto& g = tp.grad_of(self);
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    const Shape s = shapes[k];
                    if (double* gp = tp.grad_sink(ids[k])) {
                      for (std::size_t r = 0; r < s.rows; ++r) {
                        for (std::size_t c = 0; c < s.cols; ++c) {
                          const std::size_t src = axis == 0 ? (off + r) * out.cols + c : r * out.cols + off + c;
                          gp[r * s.cols + c] += g[src];
                        }
                      }
                    }
                    off += axis == 0 ? s.rows : s.cols;
                  }
                });
}

inline Var concat(const Var& a, const Var& b, int axis) {
  const Var parts[] = {a, b};
  return concat(parts, axis);
}

/// Rows [begin, begin + count).
inline Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  const Shape s = a.shape();
  if (begin + count > s.rows) throw std::out_of_range("slice_rows out of range");
  Tape& t = a.tape();
  const auto& v = a.value();
  std::vector<double> y(v.begin() + static_cast<std::ptrdiff_t>(begin * s.cols),
                        v.begin() + static_cast<std::ptrdiff_t>((begin + count) * s.cols));
  const Shape out{count, s.cols};
  if (!t.requires_grad(a.id())) return t.push(out, std::move(y), false, {});
  return t.push(out, std::move(y), true, [ai = a.id(), offset = begin * s.cols](Tape& tp, std::size_t self) {
    double* ga = tp.grad_sink(ai);
    const auto& g = tp.grad_of(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

// ---- gradient checking --------------------------------------------------------

/// |a - n| / max(|a| + |n|, floor). The floor keeps gradients that are zero
/// by construction from turning finite-difference rounding into error.
inline double relative_error(double analytic, double numeric, double floor = 1e-12) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

/// Central differences of a scalar function of a flat vector.
inline std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                               std::vector<double> x, double step) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-12) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  }
  return worst;
}

using TensorFunction = std::function<Var(Tape&, const Var&)>;

/// Max relative error between the tape gradient of scalar `f` at `x` and
/// central differences with the given step.
inline double grad_check(const TensorFunction& f, Shape shape, const std::vector<double>& x, double step = 1e-5) {
  std::vector<double> analytic;
  {
    Tape tape;
    const Var v = tape.variable(shape, x);
    const Var y = f(tape, v);
    tape.backward(y);
    analytic = v.grad().empty() ? std::vector<double>(x.size(), 0.0) : v.grad();
  }
  const auto value = [&](std::span<const double> p) {
    Tape tape;
    const Var v = tape.constant(shape, std::vector<double>(p.begin(), p.end()));
    return f(tape, v).item();
  };
  const auto numeric = central_differences(value, x, step);
  return max_relative_error(analytic, numeric);
}

}  // namespace acone::ad
