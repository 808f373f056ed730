#include <cmath>
#include <numbers>

#include "svgsmith/shape_prior.hpp"

namespace svgsmith::shape {

svg::Path ShapeDecoder::decode(const LatentShape& latent) const {
  const std::vector<Vec2> pts = decode_points(latent);
  svg::Path path;
  path.id = latent.path_id;
  path.closed = true;
  path.commands.push_back(svg::Command::move(pts[0]));
  for (int j = 0; j < kDecodedCubics; ++j)
    path.commands.push_back(svg::Command::cubic(pts[1 + 3 * j], pts[2 + 3 * j], pts[3 + 3 * j]));
  return path;
}

namespace {

// Value and derivative of e^{i m t} times a real (re) or imaginary (im) unit coefficient.
struct Term {
  Vec2 value;
  Vec2 deriv;
};

Term harmonic(int m, double t, bool imaginary) {
  const double c = std::cos(m * t), s = std::sin(m * t);
  if (!imaginary) return {{c, s}, {-m * s, m * c}};
  return {{-s, c}, {-m * c, -m * s}};
}

}  // namespace

FourierDecoder::FourierDecoder(int dimension) : dim_(dimension) {
  if (dimension < 4 || dimension % 4 != 0) throw ArgumentError("decoder dimension must be a positive multiple of 4");
  const double step = 2.0 * std::numbers::pi / kDecodedCubics;
  // Tangent length that makes each Hermite cubic hug a circular arc.
  const double k = 4.0 / 3.0 * std::tan(step / 4.0);

  base_.assign(kDecodedPoints, Vec2{});
  jacobian_.assign(static_cast<std::size_t>(kDecodedPoints) * dim_, Vec2{});
  // Row r of the Jacobian: (value, derivative) of the r-th basis term at t.
  auto row_terms = [&](double t) {
    std::vector<Term> terms(dim_);
    for (int h = 0; h < dim_ / 4; ++h) {
      terms[4 * h + 0] = harmonic(h, t, false);
      terms[4 * h + 1] = harmonic(h, t, true);
      terms[4 * h + 2] = harmonic(-(h + 1), t, false);
      terms[4 * h + 3] = harmonic(-(h + 1), t, true);
    }
    return terms;
  };
  auto set_point = [&](int m, Vec2 base, const std::vector<Term>& terms, double deriv_factor, bool use_value) {
    base_[m] = base;
    for (int r = 0; r < dim_; ++r) {
      Vec2 v = use_value ? terms[r].value : Vec2{};
      v += terms[r].deriv * deriv_factor;
      jacobian_[static_cast<std::size_t>(m) * dim_ + r] = v;
    }
  };

  const Term circle0 = harmonic(1, 0.0, false);
  set_point(0, circle0.value, row_terms(0.0), 0.0, true);
  for (int j = 0; j < kDecodedCubics; ++j) {
    const double t0 = j * step, t1 = (j + 1) * step;
    const Term c0 = harmonic(1, t0, false), c1 = harmonic(1, t1, false);
    const auto r0 = row_terms(t0), r1 = row_terms(t1);
    set_point(1 + 3 * j, c0.value + c0.deriv * k, r0, k, true);
    set_point(2 + 3 * j, c1.value - c1.deriv * k, r1, -k, true);
    if (j + 1 < kDecodedCubics) set_point(3 + 3 * j, c1.value, r1, 0.0, true);
  }
  // The loop closes on its Move point exactly.
  base_[kDecodedPoints - 1] = base_[0];
  for (int r = 0; r < dim_; ++r)
    jacobian_[static_cast<std::size_t>(kDecodedPoints - 1) * dim_ + r] = jacobian_[r];
}

std::vector<Vec2> FourierDecoder::decode_points(const LatentShape& latent) const {
  if (static_cast<int>(latent.z.size()) != dim_)
    throw ArgumentError("latent has dimension " + std::to_string(latent.z.size()) + ", decoder expects " +
                        std::to_string(dim_));
  for (double v : latent.z)
    if (!std::isfinite(v)) throw ArgumentError("latent has non-finite entries");
  if (!std::isfinite(latent.frame.scale) || !is_finite(latent.frame.center))
    throw ArgumentError("latent frame is not finite");
  std::vector<Vec2> out(kDecodedPoints);
  for (int m = 0; m < kDecodedPoints - 1; ++m) {
    Vec2 p = base_[m];
    for (int r = 0; r < dim_; ++r) p += jacobian_[static_cast<std::size_t>(m) * dim_ + r] * latent.z[r];
    out[m] = latent.frame.center + p * latent.frame.scale;
  }
  out[kDecodedPoints - 1] = out[0];
  return out;
}

std::vector<double> FourierDecoder::pullback(const LatentShape& latent, std::span<const Vec2> point_grads) const {
  if (point_grads.size() != static_cast<std::size_t>(kDecodedPoints))
    throw ArgumentError("expected one gradient per decoded control point");
  std::vector<double> g(dim_, 0.0);
  for (int m = 0; m < kDecodedPoints; ++m)
    for (int r = 0; r < dim_; ++r)
      g[r] += dot(jacobian_[static_cast<std::size_t>(m) * dim_ + r], point_grads[m]) * latent.frame.scale;
  return g;
}

}  // namespace svgsmith::shape
