#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svgsmith/svg.hpp"

namespace svgsmith::shape {

using PointSet = std::vector<Vec2>;

/// Placement of a latent's unit-scale contour on the canvas.
struct Frame {
  Vec2 center{0, 0};
  double scale = 1.0;
  bool operator==(const Frame&) const = default;
};

struct LatentShape {
  std::vector<double> z;
  Frame frame;
  std::string path_id;
  bool operator==(const LatentShape&) const = default;
};

inline constexpr int kDecodedCubics = 10;
/// Move point plus three control points per cubic.
inline constexpr int kDecodedPoints = 1 + 3 * kDecodedCubics;

class ShapeDecoder {
 public:
  virtual ~ShapeDecoder() = default;
  virtual int dimension() const = 0;
  /// Control points of the decoded loop in Path::control_points order.
  virtual std::vector<Vec2> decode_points(const LatentShape& latent) const = 0;
  /// dLoss/dz given dLoss/d(control point) for every decoded point.
  virtual std::vector<double> pullback(const LatentShape& latent, std::span<const Vec2> point_grads) const = 0;

  /// A closed path of one Move and kDecodedCubics cubics.
  svg::Path decode(const LatentShape& latent) const;
};

/// Closed contour w(t) = e^{it} + sum_k a_k e^{ikt} + sum_k b_k e^{-i(k+1)t}
/// for k < D/4, fit by Hermite cubics at ten evenly spaced parameters. z packs
/// (Re a_k, Im a_k, Re b_k, Im b_k) per k, so z = 0 gives the unit circle.
/// Harmonic 0 translates and harmonic 1 scales/rotates the loop.
class FourierDecoder final : public ShapeDecoder {
 public:
  explicit FourierDecoder(int dimension = 32);
  int dimension() const override { return dim_; }
  std::vector<Vec2> decode_points(const LatentShape& latent) const override;
  std::vector<double> pullback(const LatentShape& latent, std::span<const Vec2> point_grads) const override;

 private:
  int dim_;
  std::vector<Vec2> base_;       // kDecodedPoints
  std::vector<Vec2> jacobian_;   // kDecodedPoints x dim_, row-major
};

/// `n` points evenly spaced by arc length along the path (after its
/// transform), starting at the first Move point. Closed paths space points
/// by L/n, open paths by L/(n-1) including both endpoints.
PointSet sample_contour(const svg::Path& path, int n);

/// Contour samples together with their derivative. Arc length is measured
/// on an adaptive flattening, so moving a control point both moves the curve
/// and slides every sample along it; pullback accounts for both.
class ContourSampler {
 public:
  ContourSampler(const svg::Path& path, int n);
  ~ContourSampler();
  ContourSampler(ContourSampler&&) noexcept;
  ContourSampler& operator=(ContourSampler&&) noexcept;

  const PointSet& points() const;
  double length() const;
  /// dLoss/d(control points, path space) given dLoss/d(points()).
  std::vector<Vec2> pullback(std::span<const Vec2> point_grads) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Total arc length of the path outline (after its transform).
double contour_length(const svg::Path& path);

struct Assignment {
  double cost = 0.0;
  std::vector<int> match;  // match[i] = index of the Y point paired with X[i]
};

/// Minimum over bijections of the summed Euclidean distances.
double emd(const PointSet& x, const PointSet& y);
Assignment emd_assignment(const PointSet& x, const PointSet& y);

/// Frame centered on the path's bounding box with half its larger side as scale.
Frame frame_for(const svg::Path& path);

struct InvertOptions {
  int samples = 64;
  int iters = 500;
  double lr = 0.05;
  double init_sigma = 0.1;
  std::uint64_t seed = 0;
};

struct InversionResult {
  LatentShape latent;  // best-seen latent
  double initial_emd = 0.0;
  double final_emd = 0.0;  // EMD of `latent`
  std::vector<double> trace;  // EMD per iteration
};

InversionResult invert(const svg::Path& target, const ShapeDecoder& decoder, const InvertOptions& options = {});
InversionResult invert(const svg::Path& target, int n, int iters);

}  // namespace svgsmith::shape
