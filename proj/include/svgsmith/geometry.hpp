#pragma once

#include <array>
#include <cmath>

namespace svgsmith {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
constexpr double norm2(Vec2 v) { return v.x * v.x + v.y * v.y; }
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }
constexpr Vec2 lerp(Vec2 a, Vec2 b, double t) { return a + (b - a) * t; }

/// SVG affine matrix(a b c d e f): x' = a*x + c*y + e, y' = b*x + d*y + f.
struct Affine {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0, e = 0.0, f = 0.0;

  static constexpr Affine identity() { return {}; }
  static constexpr Affine translate(double tx, double ty) { return {1, 0, 0, 1, tx, ty}; }
  static constexpr Affine scale(double sx, double sy) { return {sx, 0, 0, sy, 0, 0}; }
  static Affine rotate(double degrees) {
    const double r = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(r), sn = std::sin(r);
    return {cs, sn, -sn, cs, 0, 0};
  }

  constexpr Vec2 apply(Vec2 p) const { return {a * p.x + c * p.y + e, b * p.x + d * p.y + f}; }
  constexpr Vec2 apply_linear(Vec2 p) const { return {a * p.x + c * p.y, b * p.x + d * p.y}; }
  /// Applies the transpose of the linear part (used for pulling back gradients).
  constexpr Vec2 apply_linear_transposed(Vec2 g) const {
    return {a * g.x + b * g.y, c * g.x + d * g.y};
  }

  /// (*this) * rhs: rhs is applied first.
  constexpr Affine operator*(const Affine& r) const {
    return {a * r.a + c * r.b, b * r.a + d * r.b, a * r.c + c * r.d,
            b * r.c + d * r.d, a * r.e + c * r.f + e, b * r.e + d * r.f + f};
  }

  constexpr bool is_identity() const { return *this == Affine{}; }
  constexpr std::array<double, 6> entries() const { return {a, b, c, d, e, f}; }
  constexpr bool operator==(const Affine&) const = default;
};

struct Rgba {
  double r = 0.0, g = 0.0, b = 0.0, a = 1.0;
  constexpr bool operator==(const Rgba&) const = default;
};

namespace bezier {

constexpr std::array<double, 4> basis(double t) {
  const double s = 1.0 - t;
  return {s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t};
}

constexpr Vec2 eval(Vec2 p0, Vec2 p1, Vec2 p2, Vec2 p3, double t) {
  const auto w = basis(t);
  return p0 * w[0] + p1 * w[1] + p2 * w[2] + p3 * w[3];
}

constexpr Vec2 derivative(Vec2 p0, Vec2 p1, Vec2 p2, Vec2 p3, double t) {
  const double s = 1.0 - t;
  return (p1 - p0) * (3.0 * s * s) + (p2 - p1) * (6.0 * s * t) + (p3 - p2) * (3.0 * t * t);
}

}  // namespace bezier

}  // namespace svgsmith
