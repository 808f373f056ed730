#include <algorithm>
#include <cmath>

#include "svgsmith/shape_prior.hpp"

namespace svgsmith::shape {
namespace {

// A piece of the flattened outline, with the parameter range it spans on
// its source segment (a cubic, or the straight closing segment of a closed
// subpath whose end does not meet its start).
struct Piece {
  int segment;
  double t0, t1;
  double length;
  Vec2 dir;  // unit chord direction
};

struct Segment {
  std::array<Vec2, 4> pts;     // transformed; a line keeps its ends in pts[0], pts[3]
  std::array<int, 4> idx;      // control-point indices
  bool line = false;

  Vec2 eval(double t) const { return line ? lerp(pts[0], pts[3], t) : bezier::eval(pts[0], pts[1], pts[2], pts[3], t); }
  Vec2 tangent(double t) const {
    return line ? pts[3] - pts[0] : bezier::derivative(pts[0], pts[1], pts[2], pts[3], t);
  }
  /// Adds g * d(eval(t))/d(control point) to `out`.
  void scatter(double t, Vec2 g, std::vector<Vec2>& out) const {
    if (line) {
      out[idx[0]] += g * (1.0 - t);
      out[idx[3]] += g * t;
      return;
    }
    const auto w = bezier::basis(t);
    for (int k = 0; k < 4; ++k) out[idx[k]] += g * w[k];
  }
};

std::vector<Segment> outline(const svg::Path& path) {
  std::vector<Segment> segs;
  std::vector<Vec2> cp = path.control_points();
  for (auto& p : cp) p = path.transform.apply(p);
  int cursor = 0, start = -1, prev = -1;
  auto close = [&] {
    if (path.closed && start >= 0 && prev >= 0 && !(cp[prev] == cp[start])) {
      Segment s;
      s.line = true;
      s.pts = {cp[prev], Vec2{}, Vec2{}, cp[start]};
      s.idx = {prev, 0, 0, start};
      segs.push_back(s);
    }
  };
  for (const auto& cmd : path.commands) {
    if (cmd.kind == svg::CommandKind::Move) {
      close();
      start = prev = cursor;
      cursor += 1;
      continue;
    }
    if (prev < 0) throw DegenerateShapeError("path " + path.id + " does not begin with a move");
    Segment s;
    s.idx = {prev, cursor, cursor + 1, cursor + 2};
    s.pts = {cp[prev], cp[cursor], cp[cursor + 1], cp[cursor + 2]};
    segs.push_back(s);
    prev = cursor + 2;
    cursor += 3;
  }
  close();
  if (segs.empty()) throw DegenerateShapeError("path " + path.id + " has no curve segments");
  return segs;
}

// Adaptive flattening: split until the midpoint deviates from the chord by
// less than `tol`, with a minimum depth so curvy pieces are never skipped.
void flatten(const Segment& s, int index, double t0, double t1, Vec2 a, Vec2 b, int depth, double tol,
             std::vector<Piece>& out) {
  const double tm = 0.5 * (t0 + t1);
  const Vec2 m = s.eval(tm);
  const bool flat = norm(m - (a + b) * 0.5) < tol;
  if (s.line || depth >= 18 || (depth >= 4 && flat)) {
    const double len = norm(b - a);
    out.push_back({index, t0, t1, len, len > 0 ? (b - a) / len : Vec2{}});
    return;
  }
  flatten(s, index, t0, tm, a, m, depth + 1, tol, out);
  flatten(s, index, tm, t1, m, b, depth + 1, tol, out);
}

std::vector<Piece> flatten_all(const std::vector<Segment>& segs) {
  double extent = 0;
  for (const auto& s : segs)
    for (const auto& p : s.pts) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
  const double tol = std::max(1e-9, 1e-5 * extent);
  std::vector<Piece> pieces;
  for (int i = 0; i < static_cast<int>(segs.size()); ++i)
    flatten(segs[i], i, 0.0, 1.0, segs[i].eval(0.0), segs[i].eval(1.0), 0, tol, pieces);
  return pieces;
}

struct Sample {
  int piece;
  double f;
  double t;
  bool pinned;  // endpoint of an open path: does not slide
};

}  // namespace

struct ContourSampler::Impl {
  Affine transform;
  std::size_t control_points = 0;
  std::vector<Segment> segs;
  std::vector<Piece> pieces;
  std::vector<Sample> samples;
  PointSet points;
  double total = 0.0;
  bool closed = false;
  int n = 0;
};

ContourSampler::ContourSampler(const svg::Path& path, int n) : impl_(std::make_unique<Impl>()) {
  if (n < 2) throw ArgumentError("contour sampling needs at least 2 points");
  Impl& m = *impl_;
  m.transform = path.transform;
  m.control_points = path.control_points().size();
  m.segs = outline(path);
  m.pieces = flatten_all(m.segs);
  m.closed = path.closed;
  m.n = n;
  for (const auto& p : m.pieces) m.total += p.length;
  if (!std::isfinite(m.total)) throw DegenerateShapeError("path " + path.id + " has non-finite length");
  if (!(m.total > 0)) throw DegenerateShapeError("path " + path.id + " has zero length");

  const double spacing = m.closed ? m.total / n : m.total / (n - 1);
  std::size_t piece = 0;
  double walked = 0;  // arc length before `piece`
  for (int k = 0; k < n; ++k) {
    const double target = k * spacing;
    while (piece + 1 < m.pieces.size() && walked + m.pieces[piece].length < target) walked += m.pieces[piece++].length;
    const Piece& pc = m.pieces[piece];
    double f = pc.length > 0 ? (target - walked) / pc.length : 0.0;
    bool pinned = f < 0.0 || f > 1.0 || k == 0;
    f = std::clamp(f, 0.0, 1.0);
    if (!m.closed && k == n - 1) {
      f = 1.0;
      pinned = true;
    }
    const double t = pc.t0 + (pc.t1 - pc.t0) * f;
    m.samples.push_back({static_cast<int>(piece), f, t, pinned});
    m.points.push_back(m.segs[pc.segment].eval(t));
  }
}

ContourSampler::~ContourSampler() = default;
ContourSampler::ContourSampler(ContourSampler&&) noexcept = default;
ContourSampler& ContourSampler::operator=(ContourSampler&&) noexcept = default;

const PointSet& ContourSampler::points() const { return impl_->points; }
double ContourSampler::length() const { return impl_->total; }

// Sample i sits at arc length s_i = i * L / n on piece k at fraction
// f = (s_i - S_k) / len_k, where S_k is the length before piece k. Both L and
// S_k are sums of chord lengths whose end parameters are fixed, so their
// derivatives are chord directions dotted with the Bernstein weights.
std::vector<Vec2> ContourSampler::pullback(std::span<const Vec2> point_grads) const {
  const Impl& m = *impl_;
  if (point_grads.size() != m.points.size()) throw ArgumentError("expected one gradient per contour sample");
  std::vector<Vec2> g(m.control_points);
  std::vector<double> at_piece(m.pieces.size(), 0.0);    // sum of a_i over samples on the piece
  std::vector<double> f_at_piece(m.pieces.size(), 0.0);  // sum of a_i * f_i
  double total_coef = 0.0;
  const double denom = m.closed ? m.n : m.n - 1;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const Sample& s = m.samples[i];
    const Piece& pc = m.pieces[s.piece];
    const Segment& seg = m.segs[pc.segment];
    seg.scatter(s.t, point_grads[i], g);
    if (s.pinned || pc.length <= 0) continue;
    // d(point)/d(f) = tangent * (t1 - t0); a_i is the loss sensitivity to f scaled by 1/len.
    const double a = dot(point_grads[i], seg.tangent(s.t)) * (pc.t1 - pc.t0) / pc.length;
    total_coef += a * (static_cast<double>(i) / denom);
    at_piece[s.piece] += a;
    f_at_piece[s.piece] += a * s.f;
  }
  double after = 0.0;  // sum of a_i over samples on later pieces
  for (std::size_t k = m.pieces.size(); k-- > 0;) {
    const double coef = total_coef - after - f_at_piece[k];
    after += at_piece[k];
    if (coef == 0.0) continue;
    const Piece& pc = m.pieces[k];
    const Segment& seg = m.segs[pc.segment];
    seg.scatter(pc.t1, pc.dir * coef, g);
    seg.scatter(pc.t0, pc.dir * -coef, g);
  }
  for (auto& v : g) v = m.transform.apply_linear_transposed(v);
  return g;
}

double contour_length(const svg::Path& path) {
  double total = 0;
  for (const auto& p : flatten_all(outline(path))) total += p.length;
  return total;
}

PointSet sample_contour(const svg::Path& path, int n) { return ContourSampler(path, n).points(); }

Frame frame_for(const svg::Path& path) {
  const PointSet pts = sample_contour(path, 256);
  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double scale = std::max(hi.x - lo.x, hi.y - lo.y) / 2.0;
  if (!(scale > 0)) throw DegenerateShapeError("path " + path.id + " has an empty bounding box");
  return {(lo + hi) * 0.5, scale};
}

}  // namespace svgsmith::shape
