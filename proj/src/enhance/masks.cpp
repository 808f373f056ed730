#include <algorithm>
#include <cmath>
#include <deque>

#include "svgsmith/enhance.hpp"
#include "svgsmith/error.hpp"

namespace svgsmith::enhance {

using raster::BinaryMask;
using raster::RasterImage;

void MaskSet::validate() const {
  for (const auto& m : masks)
    if (m.width != masks.front().width || m.height != masks.front().height)
      throw ArgumentError("mask set mixes dimensions");
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height) throw ArgumentError("mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] && b.bits[i];
    uni += a.bits[i] || b.bits[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::size_t> filter_new_mask_indices(const MaskSet& tpt, const MaskSet& tgt, const FilterOptions& opt) {
  if (!(opt.threshold > 0.0 && opt.threshold < 1.0)) throw ArgumentError("iou threshold must lie in (0, 1)");
  tpt.validate();
  tgt.validate();
  if (!tpt.masks.empty() && !tgt.masks.empty() &&
      (tpt.masks.front().width != tgt.masks.front().width || tpt.masks.front().height != tgt.masks.front().height))
    throw ArgumentError("template and target masks differ in size");

  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < tgt.masks.size(); ++j) {
    const auto& m = tgt.masks[j];
    if (m.count() < opt.min_area) continue;
    bool overlaps = false;
    double best = 0.0;
    for (const auto& t : tpt.masks) {
      std::size_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < m.bits.size(); ++i) {
        inter += m.bits[i] && t.bits[i];
        uni += m.bits[i] || t.bits[i];
      }
      if (inter == 0) continue;
      overlaps = true;
      best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
    }
    if (!overlaps || best < opt.threshold) kept.push_back(j);
  }
  return kept;
}

std::vector<BinaryMask> filter_new_masks(const MaskSet& tpt, const MaskSet& tgt, double threshold,
                                         std::size_t min_area) {
  std::vector<BinaryMask> out;
  for (std::size_t j : filter_new_mask_indices(tpt, tgt, {threshold, min_area})) out.push_back(tgt.masks[j]);
  return out;
}

namespace {

// Largest 4-connected component; ties go to the one found first in raster order.
BinaryMask largest_component(const BinaryMask& mask) {
  const int w = mask.width, h = mask.height;
  std::vector<int> label(mask.bits.size(), -1);
  std::vector<std::size_t> sizes;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < mask.bits.size(); ++s) {
    if (!mask.bits[s] || label[s] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t n = 0;
    label[s] = id;
    queue.push_back(s);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++n;
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny[k]) * w + nx[k];
        if (mask.bits[j] && label[j] < 0) {
          label[j] = id;
          queue.push_back(j);
        }
      }
    }
    sizes.push_back(n);
  }
  BinaryMask out(w, h);
  if (sizes.empty()) return out;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) out.bits[i] = label[i] == best;
  return out;
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm(p - a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

}  // namespace

std::vector<Vec2> trace_outline(const BinaryMask& mask) {
  const BinaryMask comp = largest_component(mask);
  const auto first = std::find(comp.bits.begin(), comp.bits.end(), 1);
  if (first == comp.bits.end()) throw DegenerateShapeError("mask is empty");
  const std::size_t s = static_cast<std::size_t>(first - comp.bits.begin());
  const int sx = static_cast<int>(s % comp.width), sy = static_cast<int>(s / comp.width);

  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < comp.width && y < comp.height && comp.get(x, y);
  };
  // Walk pixel-corner vertices with the region on the right. Directions E, S,
  // W, N; for each, the offsets of the pixel ahead-left and ahead-right of
  // the current vertex.
  static constexpr int dx[4] = {1, 0, -1, 0}, dy[4] = {0, 1, 0, -1};
  static constexpr int fl[4][2] = {{0, -1}, {0, 0}, {-1, 0}, {-1, -1}};
  static constexpr int fr[4][2] = {{0, 0}, {-1, 0}, {-1, -1}, {0, -1}};

  std::vector<Vec2> out{{double(sx), double(sy)}};
  int vx = sx + 1, vy = sy, dir = 0;
  while (true) {
    const bool right = inside(vx + fr[dir][0], vy + fr[dir][1]);
    const bool left = inside(vx + fl[dir][0], vy + fl[dir][1]);
    int next = !right ? (dir + 1) % 4 : left ? (dir + 3) % 4 : dir;
    if (vx == sx && vy == sy) break;
    if (next != dir) out.push_back({double(vx), double(vy)});
    dir = next;
    vx += dx[dir];
    vy += dy[dir];
  }
  return out;
}

std::vector<Vec2> simplify_closed(const std::vector<Vec2>& loop, double tol) {
  const std::size_t n = loop.size();
  if (n <= 3) return loop;
  auto fits = [&](std::size_t i, std::size_t j) {
    for (std::size_t k = i + 1; k < j; ++k)
      if (segment_distance(loop[k % n], loop[i % n], loop[j % n]) > tol) return false;
    return true;
  };
  std::vector<Vec2> out{loop[0]};
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && fits(i, j + 1)) ++j;
    if (j < n) out.push_back(loop[j]);
    i = j;
  }
  return out.size() < 3 ? loop : out;
}

svg::Path mask_to_polygon(const BinaryMask& mask, double tol, const RasterImage* target, const svg::Canvas* canvas) {
  if (!(tol >= 0.0)) throw ArgumentError("tolerance must be non-negative");
  const double sx = canvas ? canvas->width / mask.width : 1.0;
  const double sy = canvas ? canvas->height / mask.height : 1.0;
  std::vector<Vec2> loop = trace_outline(mask);
  for (auto& p : loop) p = {p.x * sx, p.y * sy};
  loop = simplify_closed(loop, tol);

  svg::Path path;
  path.closed = true;
  path.semantic_label = kDetailLabel;
  path.commands.push_back(svg::Command::move(loop[0]));
  for (std::size_t i = 1; i <= loop.size(); ++i)
    path.commands.push_back(svg::Command::line(loop[i - 1], loop[i % loop.size()]));

  path.fill = {0, 0, 0, 1};
  if (target && target->width == mask.width && target->height == mask.height) {
    double sum[3] = {0, 0, 0};
    std::size_t n = 0;
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) {
        if (!mask.get(x, y)) continue;
        for (int c = 0; c < 3; ++c) sum[c] += target->at(x, y, c);
        ++n;
      }
    if (n > 0) path.fill = {sum[0] / n, sum[1] / n, sum[2] / n, 1.0};
  }
  return path;
}

svg::Document add_detail_paths(const svg::Document& doc, const std::vector<BinaryMask>& masks,
                               const RasterImage& target, double tol) {
  svg::Document out = doc;
  for (const auto& m : masks) {
    svg::Path p = mask_to_polygon(m, tol, &target, &doc.canvas);
    p.id = svg::path_id(out.paths.size() + 1);
    out.paths.push_back(std::move(p));
  }
  return svg::renumber_ids(std::move(out)).doc;
}

RasterImage gaussian_blur(const RasterImage& image, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("blur sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;

  const int w = image.width, h = image.height;
  RasterImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * image.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp.at(x, y, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        out.at(x, y, c) = acc;
      }
  return out;
}

}  // namespace svgsmith::enhance
