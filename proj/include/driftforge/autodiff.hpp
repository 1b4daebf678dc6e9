#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftforge::ad {

struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

class Tape;

// Scalar handle into a reverse-mode tape. Plain constants stay off the tape;
// anything derived from a tape variable records a node with local partials.
class Value {
 public:
  Value() = default;
  Value(double v) : v_(v) {}  // NOLINT: implicit constants are the point
  Value(double v, Tape* tape, std::int32_t index) : v_(v), tape_(tape), index_(index) {}

  double value() const { return v_; }
  Tape* tape() const { return tape_; }
  std::int32_t index() const { return index_; }
  bool on_tape() const { return tape_ != nullptr; }

 private:
  double v_ = 0.0;
  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
};

inline double primal(const Value& x) { return x.value(); }

class Tape {
 public:
  Value variable(double v) { return Value(v, this, push(-1, 0.0, -1, 0.0)); }

  std::int32_t push(std::int32_t a, double da, std::int32_t b, double db) {
    nodes_.push_back(Node{a, b, da, db});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  // Accumulates d(output)/d(node) for every node. Single-shot: a second call
  // without reset() would silently double-count, so it is rejected.
  void backward(const Value& out) {
    if (out.tape() != this) throw std::logic_error("backward: output not on this tape");
    if (backward_done_) throw std::logic_error("backward: tape already differentiated; reset() first");
    backward_done_ = true;
    grads_.assign(nodes_.size(), 0.0);
    grads_[static_cast<std::size_t>(out.index())] = 1.0;
    for (std::int32_t i = out.index(); i >= 0; --i) {
      const double g = grads_[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.a >= 0) grads_[static_cast<std::size_t>(n.a)] += n.da * g;
      if (n.b >= 0) grads_[static_cast<std::size_t>(n.b)] += n.db * g;
    }
  }

  double grad(const Value& v) const {
    if (!backward_done_) throw std::logic_error("grad: backward() has not run");
    if (v.tape() != this) throw std::logic_error("grad: value not on this tape");
    return grads_[static_cast<std::size_t>(v.index())];
  }

  void reset() {
    nodes_.clear();
    grads_.clear();
    backward_done_ = false;
  }

  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t num_nodes() const { return nodes_.size(); }
  bool differentiated() const { return backward_done_; }

 private:
  struct Node {
    std::int32_t a;
    std::int32_t b;
    double da;
    double db;
  };

  std::vector<Node> nodes_;
  std::vector<double> grads_;
  bool backward_done_ = false;
};

namespace detail {

inline Tape* joint_tape(const Value& x, const Value& y) {
  if (x.on_tape() && y.on_tape() && x.tape() != y.tape())
    throw std::logic_error("values live on different tapes");
  return x.on_tape() ? x.tape() : y.tape();
}

inline Value binary(const Value& x, const Value& y, double v, double dx, double dy) {
  Tape* t = joint_tape(x, y);
  if (!t) return Value(v);
  return Value(v, t, t->push(x.index(), dx, y.index(), dy));
}

inline Value unary(const Value& x, double v, double dx) {
  if (!x.on_tape()) return Value(v);
  return Value(v, x.tape(), x.tape()->push(x.index(), dx, -1, 0.0));
}

}  // namespace detail

inline Value operator+(const Value& x, const Value& y) {
  return detail::binary(x, y, x.value() + y.value(), 1.0, 1.0);
}
inline Value operator-(const Value& x, const Value& y) {
  return detail::binary(x, y, x.value() - y.value(), 1.0, -1.0);
}
inline Value operator*(const Value& x, const Value& y) {
  return detail::binary(x, y, x.value() * y.value(), y.value(), x.value());
}
inline Value operator/(const Value& x, const Value& y) {
  if (y.value() == 0.0) throw NonFiniteError("division by zero (numerator " + std::to_string(x.value()) + ")");
  const double v = x.value() / y.value();
  if (!std::isfinite(v)) throw NonFiniteError("non-finite quotient " + std::to_string(v));
  return detail::binary(x, y, v, 1.0 / y.value(), -v / y.value());
}
inline Value operator-(const Value& x) { return detail::unary(x, -x.value(), -1.0); }
inline Value operator+(const Value& x) { return x; }

inline Value& operator+=(Value& x, const Value& y) { return x = x + y; }
inline Value& operator-=(Value& x, const Value& y) { return x = x - y; }
inline Value& operator*=(Value& x, const Value& y) { return x = x * y; }
inline Value& operator/=(Value& x, const Value& y) { return x = x / y; }

inline Value sin(const Value& x) { return detail::unary(x, std::sin(x.value()), std::cos(x.value())); }
inline Value cos(const Value& x) { return detail::unary(x, std::cos(x.value()), -std::sin(x.value())); }
inline Value tanh(const Value& x) {
  const double t = std::tanh(x.value());
  return detail::unary(x, t, 1.0 - t * t);
}
inline Value sqrt(const Value& x) {
  if (x.value() < 0.0) throw NonFiniteError("sqrt of negative value " + std::to_string(x.value()));
  if (x.on_tape() && x.value() == 0.0) throw NonFiniteError("sqrt at 0 has a non-finite derivative");
  const double s = std::sqrt(x.value());
  return detail::unary(x, s, x.on_tape() ? 0.5 / s : 0.0);
}
// |.| with subgradient 0 at 0
inline Value abs(const Value& x) {
  const double s = x.value() > 0.0 ? 1.0 : (x.value() < 0.0 ? -1.0 : 0.0);
  return detail::unary(x, std::abs(x.value()), s);
}
inline Value asin(const Value& x) {
  if (std::abs(x.value()) >= 1.0) throw NonFiniteError("asin outside (-1, 1): " + std::to_string(x.value()));
  return detail::unary(x, std::asin(x.value()), 1.0 / std::sqrt(1.0 - x.value() * x.value()));
}
inline Value atan2(const Value& y, const Value& x) {
  const double d = x.value() * x.value() + y.value() * y.value();
  if (d == 0.0) throw NonFiniteError("atan2(0, 0)");
  return detail::binary(y, x, std::atan2(y.value(), x.value()), x.value() / d, -y.value() / d);
}

inline bool operator==(const Value& x, const Value& y) { return x.value() == y.value(); }
inline bool operator!=(const Value& x, const Value& y) { return x.value() != y.value(); }
inline bool operator<(const Value& x, const Value& y) { return x.value() < y.value(); }
inline bool operator>(const Value& x, const Value& y) { return x.value() > y.value(); }
inline bool operator<=(const Value& x, const Value& y) { return x.value() <= y.value(); }
inline bool operator>=(const Value& x, const Value& y) { return x.value() >= y.value(); }

}  // namespace driftforge::ad

namespace Eigen {

template <>
struct NumTraits<driftforge::ad::Value> : GenericNumTraits<driftforge::ad::Value> {
  using Real = driftforge::ad::Value;
  using NonInteger = driftforge::ad::Value;
  using Nested = driftforge::ad::Value;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
  static inline Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(NumTraits<double>::dummy_precision()); }
  static inline Real highest() { return Real(NumTraits<double>::highest()); }
  static inline Real lowest() { return Real(NumTraits<double>::lowest()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen
