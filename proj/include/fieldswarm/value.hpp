#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace fieldswarm {

using DeviceId = std::int64_t;
using SimTime = double;

/// 3D vector in metres (offsets, positions) or metres/second (velocities).
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_ = 0.0) : x(x_), y(y_), z(z_) {}

  static constexpr Vec3 zero() { return {}; }

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double k) const { return {x * k, y * k, z * k}; }
  constexpr Vec3 operator/(double k) const { return {x / k, y / k, z / k}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  Vec3& operator*=(double k) {
    x *= k;
    y *= k;
    z *= k;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  double distance(const Vec3& o) const { return (*this - o).norm(); }

  /// Unit vector with the same direction; the zero vector maps to itself.
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? *this / n : Vec3{};
  }

  /// Rescales to at most `limit` in norm, preserving direction.
  Vec3 clamped(double limit) const {
    const double n = norm();
    return n > limit && n > 0.0 ? *this * (limit / n) : *this;
  }

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double k, const Vec3& v) { return v * k; }

using Position = Vec3;

/// Marker for "no value" (unreachable G results, missing optionals).
struct Absent {
  constexpr bool operator==(const Absent&) const = default;
};

/// Closed set of transmissible values. Lists are immutable and shared, so
/// copying a Value never copies list payloads.
class Value {
 public:
  using List = std::vector<Value>;
  using ListPtr = std::shared_ptr<const List>;
  using Storage = std::variant<Absent, bool, std::int64_t, double, Vec3, ListPtr>;

  Value() = default;
  Value(Absent) {}
  Value(bool b) : data_(b) {}
  Value(std::int64_t i) : data_(i) {}
  Value(int i) : data_(static_cast<std::int64_t>(i)) {}
  Value(double d) : data_(d) {}
  Value(const Vec3& v) : data_(v) {}
  Value(List items) : data_(std::make_shared<const List>(std::move(items))) {}
  Value(ListPtr items) : data_(std::move(items)) {}

  bool is_absent() const { return std::holds_alternative<Absent>(data_); }
  bool is_bool() const { return std::holds_alternative<bool>(data_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data_); }
  bool is_double() const { return std::holds_alternative<double>(data_); }
  bool is_vec() const { return std::holds_alternative<Vec3>(data_); }
  bool is_list() const { return std::holds_alternative<ListPtr>(data_); }

  const bool* as_bool() const { return std::get_if<bool>(&data_); }
  const std::int64_t* as_int() const { return std::get_if<std::int64_t>(&data_); }
  const double* as_double() const { return std::get_if<double>(&data_); }
  const Vec3* as_vec() const { return std::get_if<Vec3>(&data_); }
  const List* as_list() const {
    auto p = std::get_if<ListPtr>(&data_);
    return p ? p->get() : nullptr;
  }

  std::size_t kind() const { return data_.index(); }
  const Storage& storage() const { return data_; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.data_.index() != b.data_.index()) return false;
    if (auto la = a.as_list()) {
      const List& lb = *b.as_list();
      return la == &lb || *la == lb;
    }
    return a.data_ == b.data_;
  }

 private:
  Storage data_;
};

/// Structural equality with an absolute tolerance on real components.
inline bool approx_equal(const Value& a, const Value& b, double tol) {
  if (a.kind() != b.kind()) return false;
  if (auto x = a.as_double()) {
    const double y = *b.as_double();
    if (std::isinf(*x) || std::isinf(y)) return *x == y;
    return std::abs(*x - y) <= tol;
  }
  if (auto v = a.as_vec()) {
    const Vec3& w = *b.as_vec();
    return std::abs(v->x - w.x) <= tol && std::abs(v->y - w.y) <= tol && std::abs(v->z - w.z) <= tol;
  }
  if (auto l = a.as_list()) {
    const auto& m = *b.as_list();
    if (l->size() != m.size()) return false;
    for (std::size_t i = 0; i < l->size(); ++i)
      if (!approx_equal((*l)[i], m[i], tol)) return false;
    return true;
  }
  return a == b;
}

namespace detail {
inline void append_double(std::string& out, double d) {
  if (std::isinf(d)) {
    out += d > 0 ? "inf" : "-inf";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  out += buf;
}
}  // namespace detail

inline void append_text(std::string& out, const Value& v) {
  if (v.is_absent()) {
    out += "absent";
  } else if (auto b = v.as_bool()) {
    out += *b ? "true" : "false";
  } else if (auto i = v.as_int()) {
    out += std::to_string(*i);
  } else if (auto d = v.as_double()) {
    detail::append_double(out, *d);
  } else if (auto p = v.as_vec()) {
    out += '(';
    detail::append_double(out, p->x);
    out += ',';
    detail::append_double(out, p->y);
    out += ',';
    detail::append_double(out, p->z);
    out += ')';
  } else if (auto l = v.as_list()) {
    out += '[';
    for (std::size_t k = 0; k < l->size(); ++k) {
      if (k) out += ',';
      append_text(out, (*l)[k]);
    }
    out += ']';
  }
}

inline std::string to_text(const Value& v) {
  std::string s;
  append_text(s, v);
  return s;
}

// ---------------------------------------------------------------------------
// Codec: conversion between host types and wire values.

template <typename T, typename = void>
struct Codec;

template <>
struct Codec<Value> {
  static Value encode(const Value& v) { return v; }
  static std::optional<Value> decode(const Value& v) { return v; }
};

template <>
struct Codec<bool> {
  static Value encode(bool b) { return Value(b); }
  static std::optional<bool> decode(const Value& v) {
    if (auto b = v.as_bool()) return *b;
    return std::nullopt;
  }
};

template <typename T>
struct Codec<T, std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool>>> {
  static Value encode(T i) { return Value(static_cast<std::int64_t>(i)); }
  static std::optional<T> decode(const Value& v) {
    if (auto i = v.as_int()) return static_cast<T>(*i);
    return std::nullopt;
  }
};

template <>
struct Codec<double> {
  static Value encode(double d) { return Value(d); }
  static std::optional<double> decode(const Value& v) {
    if (auto d = v.as_double()) return *d;
    return std::nullopt;
  }
};

template <>
struct Codec<Vec3> {
  static Value encode(const Vec3& p) { return Value(p); }
  static std::optional<Vec3> decode(const Value& v) {
    if (auto p = v.as_vec()) return *p;
    return std::nullopt;
  }
};

template <typename T>
struct Codec<std::optional<T>> {
  static Value encode(const std::optional<T>& o) { return o ? Codec<T>::encode(*o) : Value(Absent{}); }
  static std::optional<std::optional<T>> decode(const Value& v) {
    if (v.is_absent()) return std::optional<T>{};
    auto inner = Codec<T>::decode(v);
    if (!inner) return std::nullopt;
    return std::optional<T>(std::move(*inner));
  }
};

template <typename T>
struct Codec<std::vector<T>> {
  static Value encode(const std::vector<T>& items) {
    Value::List out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(Codec<T>::encode(it));
    return Value(std::move(out));
  }
  static std::optional<std::vector<T>> decode(const Value& v) {
    auto l = v.as_list();
    if (!l) return std::nullopt;
    std::vector<T> out;
    out.reserve(l->size());
    for (const auto& it : *l) {
      auto d = Codec<T>::decode(it);
      if (!d) return std::nullopt;
      out.push_back(std::move(*d));
    }
    return out;
  }
};

template <typename... Ts>
struct Codec<std::tuple<Ts...>> {
  static Value encode(const std::tuple<Ts...>& t) {
    Value::List out;
    out.reserve(sizeof...(Ts));
    std::apply([&](const auto&... e) { (out.push_back(Codec<std::decay_t<decltype(e)>>::encode(e)), ...); }, t);
    return Value(std::move(out));
  }
  static std::optional<std::tuple<Ts...>> decode(const Value& v) {
    auto l = v.as_list();
    if (!l || l->size() != sizeof...(Ts)) return std::nullopt;
    return decode_at(*l, std::index_sequence_for<Ts...>{});
  }

 private:
  template <std::size_t... I>
  static std::optional<std::tuple<Ts...>> decode_at(const Value::List& l, std::index_sequence<I...>) {
    std::tuple<std::optional<Ts>...> parts{Codec<Ts>::decode(l[I])...};
    if (!(std::get<I>(parts).has_value() && ...)) return std::nullopt;
    return std::tuple<Ts...>{std::move(*std::get<I>(parts))...};
  }
};

template <typename A, typename B>
struct Codec<std::pair<A, B>> {
  static Value encode(const std::pair<A, B>& p) {
    return Value(Value::List{Codec<A>::encode(p.first), Codec<B>::encode(p.second)});
  }
  static std::optional<std::pair<A, B>> decode(const Value& v) {
    auto l = v.as_list();
    if (!l || l->size() != 2) return std::nullopt;
    auto a = Codec<A>::decode((*l)[0]);
    auto b = Codec<B>::decode((*l)[1]);
    if (!a || !b) return std::nullopt;
    return std::pair<A, B>{std::move(*a), std::move(*b)};
  }
};

template <typename T>
Value encode(const T& v) {
  return Codec<T>::encode(v);
}

template <typename T>
std::optional<T> decode(const Value& v) {
  return Codec<T>::decode(v);
}

/// Raised when a program reads a value of the wrong kind or a missing sensor.
class EvaluationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
T decode_or_fault(const Value& v, const char* what) {
  auto d = Codec<T>::decode(v);
  if (!d) throw EvaluationFault(std::string("value kind mismatch: ") + what + " got " + to_text(v));
  return std::move(*d);
}

}  // namespace fieldswarm
