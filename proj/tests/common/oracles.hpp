#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "svgsmith/geometry.hpp"
#include "svgsmith/raster.hpp"
#include "svgsmith/svg.hpp"

namespace svgsmith::testing {

/// Minimum summed distance over every permutation (n! work).
inline double brute_force_emd(const std::vector<Vec2>& x, const std::vector<Vec2>& y) {
  std::vector<int> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) total += norm(x[i] - y[perm[i]]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return x.empty() ? 0.0 : best;
}

/// Curvature term summed path by path from the last triple backwards, each
/// second difference expanded by coordinate.
inline double curvature_oracle(const svg::Document& doc) {
  double num = 0.0;
  long den = 0;
  for (std::size_t i = doc.paths.size(); i-- > 0;) {
    std::vector<Vec2> v;
    for (const auto& c : doc.paths[i].commands)
      for (int k = 0; k < c.point_count(); ++k) v.push_back(c.pts[k]);
    const long n = static_cast<long>(v.size());
    if (n < 3) continue;
    den += n - 2;
    for (long j = n - 3; j >= 0; --j) {
      const double dx = v[j].x - 2.0 * v[j + 1].x + v[j + 2].x;
      const double dy = v[j].y - 2.0 * v[j + 1].y + v[j + 2].y;
      num += dy * dy + dx * dx;
    }
  }
  return den == 0 ? 0.0 : num / static_cast<double>(den);
}

/// 1 - IoU by counting pixels through get(x, y).
inline double iou_oracle(const std::vector<raster::BinaryMask>& cur, const std::vector<raster::BinaryMask>& init) {
  if (cur.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    long inter = 0, either = 0;
    for (int y = 0; y < cur[i].height; ++y)
      for (int x = 0; x < cur[i].width; ++x) {
        const bool a = cur[i].get(x, y), b = init[i].get(x, y);
        if (a && b) ++inter;
        if (a || b) ++either;
      }
    sum += either == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / either;
  }
  return sum / cur.size();
}

/// Largest distance from a sample of the original trace to the subdivided
/// trace at the matching parameter: t in [0, .5] maps to 2t on the first half.
inline double subdivision_deviation(const svg::Path& original, const svg::Path& split, int samples) {
  double worst = 0.0;
  Vec2 cur{}, scur{};
  std::size_t si = 0;
  for (const auto& c : original.commands) {
    if (c.kind == svg::CommandKind::Move) {
      cur = c.pts[0];
      while (si < split.commands.size() && split.commands[si].kind != svg::CommandKind::Move) ++si;
      scur = split.commands[si++].pts[0];
      continue;
    }
    const auto& h1 = split.commands[si];
    const auto& h2 = split.commands[si + 1];
    si += 2;
    for (int k = 0; k <= samples; ++k) {
      const double t = double(k) / samples;
      const Vec2 a = bezier::eval(cur, c.pts[0], c.pts[1], c.pts[2], t);
      const Vec2 b = t <= 0.5 ? bezier::eval(scur, h1.pts[0], h1.pts[1], h1.pts[2], 2 * t)
                              : bezier::eval(h1.pts[2], h2.pts[0], h2.pts[1], h2.pts[2], 2 * t - 1);
      worst = std::max(worst, norm(a - b));
    }
    cur = c.pts[2];
    scur = h2.pts[2];
  }
  return worst;
}

}  // namespace svgsmith::testing
