// Soft-coverage rasterizer with analytic gradients.
//
// Each cubic is flattened at a fixed number of parameter steps, so every
// polyline vertex is a fixed linear combination of control points. Coverage
// of a sample near an edge is a smoothstep of its signed distance to the
// polyline; samples farther than half the smoothing width are exactly 0 or 1.
// Work is split into fixed row tiles whose partial sums are reduced in tile
// order, so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <thread>

#include "svgsmith/raster.hpp"

namespace svgsmith::raster {
namespace {

using svg::CommandKind;
using svg::Document;
using svg::Path;

constexpr int kTileRows = 16;

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct Vertex {
  Vec2 p;
  std::array<int, 4> cp{};
  std::array<double, 4> w{};
  int n = 1;
};

struct Seg {
  int a, b;
};

struct PathGeometry {
  std::vector<Vec2> local;  // control points in path space
  std::vector<Vertex> verts;  // in output-pixel space
  std::vector<Seg> fill, stroke;
  // A closed subpath whose last vertex sits exactly on its first one (the
  // usual case) forms one corner from two control points. Distance to that
  // corner has a kink in each point separately, so its gradient is split
  // evenly, matching the symmetric difference quotient.
  std::vector<int> alias;
  Affine transform;
  Affine to_pixel;
  Vec2 px_scale;
  double stroke_width = 0.0;
  double stroke_scale = 1.0;  // pixel scale times sqrt|det| of the path transform
};

PathGeometry build_geometry(const Path& path, double sx, double sy, int k) {
  PathGeometry g;
  g.local = path.control_points();
  const Affine& t = path.transform;
  for (double v : t.entries())
    if (!std::isfinite(v)) throw RenderError(path.id, "non-finite transform");
  for (const Vec2& p : g.local)
    if (!is_finite(p)) throw RenderError(path.id, "non-finite coordinate");
  g.transform = t;
  g.to_pixel = Affine::scale(sx, sy) * t;
  g.px_scale = {sx, sy};
  g.stroke_width = path.stroke.width;
  g.stroke_scale = std::sqrt(std::abs(sx * sy)) * std::sqrt(std::abs(t.a * t.d - t.b * t.c));

  std::vector<Vec2> px(g.local.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = g.to_pixel.apply(g.local[i]);

  int start = -1;
  auto finish_subpath = [&] {
    if (start < 0) return;
    const int last = static_cast<int>(g.verts.size()) - 1;
    if (last > start) {
      if (g.verts[last].p == g.verts[start].p) {
        if (g.alias.size() < g.verts.size()) g.alias.resize(g.verts.size(), -1);
        g.alias[last] = start;
        g.alias[start] = last;
      } else {
        g.fill.push_back({last, start});
        if (path.closed) g.stroke.push_back({last, start});
      }
    }
  };

  int cp = 0;
  for (const auto& cmd : path.commands) {
    if (cmd.kind == CommandKind::Move) {
      finish_subpath();
      start = static_cast<int>(g.verts.size());
      Vertex v;
      v.p = px[cp];
      v.cp = {cp, cp, cp, cp};
      v.w = {1, 0, 0, 0};
      v.n = 1;
      g.verts.push_back(v);
      cp += 1;
      continue;
    }
    if (start < 0) throw RenderError(path.id, "path data does not begin with a move");
    const int p0 = cp - 1;
    for (int s = 1; s <= k; ++s) {
      Vertex v;
      v.cp = {p0, cp, cp + 1, cp + 2};
      v.w = bezier::basis(static_cast<double>(s) / k);
      v.n = 4;
      v.p = px[p0] * v.w[0] + px[cp] * v.w[1] + px[cp + 1] * v.w[2] + px[cp + 2] * v.w[3];
      const int idx = static_cast<int>(g.verts.size());
      g.verts.push_back(v);
      g.fill.push_back({idx - 1, idx});
      g.stroke.push_back({idx - 1, idx});
    }
    cp += 3;
  }
  finish_subpath();
  g.alias.resize(g.verts.size(), -1);
  for (const auto& v : g.verts)
    if (!is_finite(v.p)) throw RenderError(path.id, "non-finite coordinate after transform");
  return g;
}

struct BandSample {
  std::int32_t idx;  // within the layer box
  std::int32_t seg;
  double u;
  Vec2 dir;  // unit vector from the closest polyline point to the sample
  double s;
  double sign;  // d(signed distance)/d(distance)
  std::array<double, 3> below;
};

struct Layer {
  int path = 0;
  bool stroke = false;
  std::array<double, 3> rgb{};
  double alpha = 0;
  double half_width = 0;  // stroke layers, output-pixel units
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive sample box
  std::vector<double> cov;
  std::vector<BandSample> band;
  std::vector<std::size_t> band_tile_start;  // per tile, plus end sentinel

  int box_w() const { return x1 - x0 + 1; }
  int box_h() const { return y1 - y0 + 1; }
  bool empty() const { return x1 < x0 || y1 < y0; }
  int tiles() const { return empty() ? 0 : (box_h() + kTileRows - 1) / kTileRows; }
};

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

struct SegDist {
  double d;
  double u;
  Vec2 diff;
};

inline SegDist seg_distance(Vec2 q, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = norm2(ab);
  double u = len2 > 0 ? dot(q - a, ab) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const Vec2 diff = q - (a + ab * u);
  return {norm(diff), u, diff};
}

// Coverage is evaluated on the supersample grid; `ss` samples per output
// pixel, geometry in output-pixel units. Sample (i, j) sits at ((i+.5)/ss, (j+.5)/ss).
void compute_coverage(Layer& layer, const PathGeometry& g, double smoothing, int ss, int grid_w, int grid_h,
                      int threads) {
  const auto& segs = layer.stroke ? g.stroke : g.fill;
  const double rb = (layer.stroke ? layer.half_width : 0.0) + smoothing / 2.0;
  double minx = INFINITY, miny = INFINITY, maxx = -INFINITY, maxy = -INFINITY;
  for (const Seg& s : segs)
    for (int v : {s.a, s.b}) {
      minx = std::min(minx, g.verts[v].p.x);
      maxx = std::max(maxx, g.verts[v].p.x);
      miny = std::min(miny, g.verts[v].p.y);
      maxy = std::max(maxy, g.verts[v].p.y);
    }
  // Clamped before the integer conversion so far-away geometry cannot overflow.
  auto lo_index = [&](double c) { return static_cast<int>(std::ceil(std::clamp(c, -4.0, 1e6) * ss - 0.5)); };
  auto hi_index = [&](double c) { return static_cast<int>(std::floor(std::clamp(c, -4.0, 1e6) * ss - 0.5)); };
  if (segs.empty() || !(maxx + rb >= 0 && maxy + rb >= 0)) {
    layer.x1 = layer.x0 - 1;
    return;
  }
  layer.x0 = std::max(0, lo_index(std::max(minx - rb, -1.0)));
  layer.y0 = std::max(0, lo_index(std::max(miny - rb, -1.0)));
  layer.x1 = std::min(grid_w - 1, hi_index(std::min(maxx + rb, grid_w / static_cast<double>(ss) + 1.0)));
  layer.y1 = std::min(grid_h - 1, hi_index(std::min(maxy + rb, grid_h / static_cast<double>(ss) + 1.0)));
  if (layer.empty()) return;

  const int bw = layer.box_w(), bh = layer.box_h();
  layer.cov.assign(static_cast<std::size_t>(bw) * bh, 0.0);
  const int tiles = layer.tiles();
  std::vector<std::vector<BandSample>> tile_band(tiles);
  const double inv = 1.0 / ss;

  parallel_for(tiles, threads, [&](int t) {
    const int r0 = layer.y0 + t * kTileRows;
    const int r1 = std::min(layer.y1, r0 + kTileRows - 1);
    const double ylo = (r0 + 0.5) * inv - rb, yhi = (r1 + 0.5) * inv + rb;
    std::vector<int> local;
    for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
      const double ay = g.verts[segs[i].a].p.y, by = g.verts[segs[i].b].p.y;
      if (std::max(ay, by) >= ylo && std::min(ay, by) <= yhi) local.push_back(i);
    }
    const int rows = r1 - r0 + 1;
    const std::size_t n = static_cast<std::size_t>(rows) * bw;
    std::vector<double> best_d(n, rb), best_u(n, 0.0);
    std::vector<int> best_s(n, -1);
    std::vector<Vec2> best_diff(n);
    for (int i : local) {
      const Vec2 a = g.verts[segs[i].a].p, b = g.verts[segs[i].b].p;
      const int sx0 = std::max(layer.x0, lo_index(std::min(a.x, b.x) - rb));
      const int sx1 = std::min(layer.x1, hi_index(std::max(a.x, b.x) + rb));
      const int sy0 = std::max(r0, lo_index(std::min(a.y, b.y) - rb));
      const int sy1 = std::min(r1, hi_index(std::max(a.y, b.y) + rb));
      for (int y = sy0; y <= sy1; ++y) {
        const double qy = (y + 0.5) * inv;
        for (int x = sx0; x <= sx1; ++x) {
          const Vec2 q{(x + 0.5) * inv, qy};
          const SegDist sd = seg_distance(q, a, b);
          const std::size_t k = static_cast<std::size_t>(y - r0) * bw + (x - layer.x0);
          if (sd.d < best_d[k]) {
            best_d[k] = sd.d;
            best_u[k] = sd.u;
            best_s[k] = i;
            best_diff[k] = sd.diff;
          }
        }
      }
    }

    std::vector<std::pair<double, int>> crossings;
    auto& band = tile_band[t];
    for (int y = r0; y <= r1; ++y) {
      const double qy = (y + 0.5) * inv;
      crossings.clear();
      if (!layer.stroke) {
        for (int i : local) {
          const Vec2 a = g.verts[segs[i].a].p, b = g.verts[segs[i].b].p;
          if ((a.y <= qy) != (b.y <= qy)) {
            const double x = a.x + (qy - a.y) * (b.x - a.x) / (b.y - a.y);
            crossings.emplace_back(x, b.y > a.y ? 1 : -1);
          }
        }
        std::sort(crossings.begin(), crossings.end());
      }
      std::size_t next = 0;
      int winding = 0;
      for (int x = layer.x0; x <= layer.x1; ++x) {
        const double qx = (x + 0.5) * inv;
        while (next < crossings.size() && crossings[next].first < qx) winding += crossings[next++].second;
        const std::size_t k = static_cast<std::size_t>(y - r0) * bw + (x - layer.x0);
        const std::size_t idx = static_cast<std::size_t>(y - layer.y0) * bw + (x - layer.x0);
        double cov;
        if (layer.stroke) {
          if (best_s[k] < 0) continue;
          const double s = std::clamp(0.5 - (best_d[k] - layer.half_width) / smoothing, 0.0, 1.0);
          cov = smoothstep(s);
          if (s > 0.0 && s < 1.0) {
            const double d = best_d[k];
            const Vec2 dir = d > 0 ? best_diff[k] / d : Vec2{};
            band.push_back({static_cast<std::int32_t>(idx), best_s[k], best_u[k], dir, s, 1.0, {}});
          }
        } else {
          const bool inside = winding != 0;
          if (best_s[k] < 0) {
            cov = inside ? 1.0 : 0.0;
          } else {
            const double sign = inside ? -1.0 : 1.0;
            const double s = 0.5 - sign * best_d[k] / smoothing;
            cov = smoothstep(s);
            const double d = best_d[k];
            const Vec2 dir = d > 0 ? best_diff[k] / d : Vec2{};
            band.push_back({static_cast<std::int32_t>(idx), best_s[k], best_u[k], dir, s, sign, {}});
          }
        }
        layer.cov[idx] = cov;
      }
    }
  });

  layer.band_tile_start.assign(tiles + 1, 0);
  std::size_t total = 0;
  for (int t = 0; t < tiles; ++t) {
    layer.band_tile_start[t] = total;
    total += tile_band[t].size();
  }
  layer.band_tile_start[tiles] = total;
  layer.band.reserve(total);
  for (auto& b : tile_band) layer.band.insert(layer.band.end(), b.begin(), b.end());
}

}  // namespace

struct DiffRenderer::Frame {
  RenderConfig cfg;
  int width = 0, height = 0, ss = 1;
  std::vector<PathGeometry> geometry;
  std::vector<Layer> layers;
  std::vector<int> mask_layer;  // per path, -1 when absent
  RasterImage image;
};

void DiffRenderer::FrameDeleter::operator()(Frame* f) const { delete f; }

DiffRenderer::DiffRenderer(RenderConfig cfg) : cfg_(cfg) { cfg_.validate(); }

DiffRenderer::FramePtr DiffRenderer::forward(const Document& doc) const {
  FramePtr frame(new Frame);
  Frame& F = *frame;
  F.cfg = cfg_;
  const auto [w, h] = cfg_.output_size(doc.canvas);
  if (w <= 0 || h <= 0) throw ArgumentError("canvas has no area");
  F.width = w;
  F.height = h;
  F.ss = cfg_.supersampling;
  const int gw = w * F.ss, gh = h * F.ss;
  const double sx = w / doc.canvas.width, sy = h / doc.canvas.height;

  F.mask_layer.assign(doc.paths.size(), -1);
  for (std::size_t i = 0; i < doc.paths.size(); ++i) {
    const Path& p = doc.paths[i];
    F.geometry.push_back(build_geometry(p, sx, sy, cfg_.segments_per_curve));
    const PathGeometry& g = F.geometry.back();
    // A closed path always gets a fill layer (even if invisible) because its
    // mask is the filled region.
    if (!g.fill.empty() && (p.fill.a > 0 || p.closed)) {
      Layer L;
      L.path = static_cast<int>(i);
      L.rgb = {p.fill.r, p.fill.g, p.fill.b};
      L.alpha = p.fill.a;
      compute_coverage(L, g, cfg_.smoothing_width, F.ss, gw, gh, cfg_.threads);
      if (p.closed) F.mask_layer[i] = static_cast<int>(F.layers.size());
      F.layers.push_back(std::move(L));
    }
    if (!g.stroke.empty() && p.stroke.width > 0) {
      Layer L;
      L.path = static_cast<int>(i);
      L.stroke = true;
      L.rgb = {p.stroke.color.r, p.stroke.color.g, p.stroke.color.b};
      L.alpha = p.stroke.color.a;
      L.half_width = p.stroke.width * g.stroke_scale / 2.0;
      compute_coverage(L, g, cfg_.smoothing_width, F.ss, gw, gh, cfg_.threads);
      if (!p.closed) F.mask_layer[i] = static_cast<int>(F.layers.size());
      F.layers.push_back(std::move(L));
    }
  }

  std::vector<double> C(static_cast<std::size_t>(gw) * gh * 3);
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = cfg_.background[i % 3];
  for (Layer& L : F.layers) {
    if (L.empty() || L.alpha <= 0) continue;
    const int bw = L.box_w();
    for (BandSample& b : L.band) {
      const std::size_t gi = static_cast<std::size_t>(L.y0 + b.idx / bw) * gw + (L.x0 + b.idx % bw);
      for (int c = 0; c < 3; ++c) b.below[c] = C[gi * 3 + c];
    }
    for (int y = L.y0; y <= L.y1; ++y)
      for (int x = L.x0; x <= L.x1; ++x) {
        const double a = L.alpha * L.cov[static_cast<std::size_t>(y - L.y0) * bw + (x - L.x0)];
        if (a == 0.0) continue;
        double* px = &C[(static_cast<std::size_t>(y) * gw + x) * 3];
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - a) + L.rgb[c] * a;
      }
  }

  F.image = RasterImage(w, h);
  const double norm_ss = 1.0 / (F.ss * F.ss);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int j = 0; j < F.ss; ++j)
          for (int i = 0; i < F.ss; ++i)
            acc += C[(static_cast<std::size_t>(y * F.ss + j) * gw + (x * F.ss + i)) * 3 + c];
        F.image.at(x, y, c) = acc * norm_ss;
      }
  return frame;
}

const RasterImage& DiffRenderer::image(const Frame& frame) const { return frame.image; }

std::vector<double> DiffRenderer::mask_coverage(const Frame& F, std::size_t path_index) const {
  if (path_index >= F.mask_layer.size()) throw ArgumentError("path index out of range");
  const int li = F.mask_layer[path_index];
  if (li < 0) return {};
  const Layer& L = F.layers[li];
  std::vector<double> out(static_cast<std::size_t>(F.width) * F.height, 0.0);
  if (L.empty()) return out;
  const double norm_ss = 1.0 / (F.ss * F.ss);
  const int bw = L.box_w();
  for (int y = L.y0; y <= L.y1; ++y)
    for (int x = L.x0; x <= L.x1; ++x)
      out[static_cast<std::size_t>(y / F.ss) * F.width + x / F.ss] +=
          L.cov[static_cast<std::size_t>(y - L.y0) * bw + (x - L.x0)] * norm_ss;
  return out;
}

ParamGradients DiffRenderer::backward(const Frame& F, std::span<const double> image_grad,
                                      const std::vector<std::vector<double>>& coverage_seeds) const {
  const std::size_t npx = static_cast<std::size_t>(F.width) * F.height;
  if (image_grad.size() != npx * 3) throw ArgumentError("image gradient has the wrong size");
  if (!coverage_seeds.empty() && coverage_seeds.size() != F.geometry.size())
    throw ArgumentError("coverage seeds must have one entry per path");
  for (const auto& s : coverage_seeds)
    if (!s.empty() && s.size() != npx) throw ArgumentError("coverage seed has the wrong size");

  const int ss = F.ss, gw = F.width * ss, gh = F.height * ss;
  const double norm_ss = 1.0 / (ss * ss);
  const double smoothing = F.cfg.smoothing_width;
  std::vector<double> G(static_cast<std::size_t>(gw) * gh * 3);
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x)
      for (int c = 0; c < 3; ++c)
        G[(static_cast<std::size_t>(y) * gw + x) * 3 + c] =
            image_grad[(static_cast<std::size_t>(y / ss) * F.width + x / ss) * 3 + c] * norm_ss;

  std::vector<std::vector<Vec2>> vgrad(F.geometry.size());
  for (std::size_t i = 0; i < F.geometry.size(); ++i) vgrad[i].assign(F.geometry[i].verts.size(), Vec2{});
  std::vector<double> dhalf(F.geometry.size(), 0.0);
  ParamGradients out;
  out.paths.resize(F.geometry.size());

  for (int li = static_cast<int>(F.layers.size()) - 1; li >= 0; --li) {
    const Layer& L = F.layers[li];
    if (L.empty()) continue;
    const PathGeometry& geom = F.geometry[L.path];
    const auto& segs = L.stroke ? geom.stroke : geom.fill;
    const std::vector<double>* seed = nullptr;
    if (F.mask_layer[L.path] == li && !coverage_seeds.empty() && !coverage_seeds[L.path].empty())
      seed = &coverage_seeds[L.path];
    const int bw = L.box_w();
    const int tiles = L.tiles();
    std::vector<std::vector<Vec2>> tile_vg(tiles);
    std::vector<double> tile_dhw(tiles, 0.0);
    std::vector<std::array<double, 3>> tile_dcol(tiles, {0, 0, 0});

    parallel_for(tiles, F.cfg.threads, [&](int t) {
      auto& vg = tile_vg[t];
      vg.assign(geom.verts.size(), Vec2{});
      for (std::size_t bi = L.band_tile_start[t]; bi < L.band_tile_start[t + 1]; ++bi) {
        const BandSample& b = L.band[bi];
        const int x = L.x0 + b.idx % bw, y = L.y0 + b.idx / bw;
        const double* g = &G[(static_cast<std::size_t>(y) * gw + x) * 3];
        double dcov = 0.0;
        if (L.alpha > 0) {
          double dalpha = 0.0;
          for (int c = 0; c < 3; ++c) dalpha += g[c] * (L.rgb[c] - b.below[c]);
          dcov = L.alpha * dalpha;
        }
        if (seed) dcov += (*seed)[static_cast<std::size_t>(y / ss) * F.width + x / ss] * norm_ss;
        if (dcov == 0.0) continue;
        const double dsd = -dcov * 6.0 * b.s * (1.0 - b.s) / smoothing;
        if (L.stroke) tile_dhw[t] -= dsd;
        const double dd = dsd * b.sign;
        const Seg& sg = segs[b.seg];
        const int corner = b.u == 0.0 ? sg.a : b.u == 1.0 ? sg.b : -1;
        if (corner >= 0 && geom.alias[corner] >= 0) {
          vg[corner] -= b.dir * (0.5 * dd);
          vg[geom.alias[corner]] -= b.dir * (0.5 * dd);
          continue;
        }
        vg[sg.a] -= b.dir * ((1.0 - b.u) * dd);
        vg[sg.b] -= b.dir * (b.u * dd);
      }
      if (L.alpha <= 0) return;
      const int r0 = L.y0 + t * kTileRows, r1 = std::min(L.y1, r0 + kTileRows - 1);
      auto& dcol = tile_dcol[t];
      for (int y = r0; y <= r1; ++y)
        for (int x = L.x0; x <= L.x1; ++x) {
          const double a = L.alpha * L.cov[static_cast<std::size_t>(y - L.y0) * bw + (x - L.x0)];
          if (a == 0.0) continue;
          double* g = &G[(static_cast<std::size_t>(y) * gw + x) * 3];
          for (int c = 0; c < 3; ++c) {
            dcol[c] += g[c] * a;
            g[c] *= (1.0 - a);
          }
        }
    });

    auto& pg = out.paths[L.path];
    for (int t = 0; t < tiles; ++t) {
      for (std::size_t v = 0; v < geom.verts.size(); ++v) vgrad[L.path][v] += tile_vg[t][v];
      dhalf[L.path] += tile_dhw[t];
      auto& target = L.stroke ? pg.stroke_rgb : pg.fill_rgb;
      for (int c = 0; c < 3; ++c) target[c] += tile_dcol[t][c];
    }
  }

  for (std::size_t i = 0; i < F.geometry.size(); ++i) {
    const PathGeometry& geom = F.geometry[i];
    auto& pg = out.paths[i];
    std::vector<Vec2> gp(geom.local.size());
    for (std::size_t v = 0; v < geom.verts.size(); ++v) {
      const Vertex& vx = geom.verts[v];
      for (int k = 0; k < vx.n; ++k) gp[vx.cp[k]] += vgrad[i][v] * vx.w[k];
    }
    // pixel = S * (T p): pull back through S, then through the path transform.
    const Affine& t = geom.transform;
    pg.points.resize(gp.size());
    for (std::size_t m = 0; m < gp.size(); ++m) {
      pg.points[m] = geom.to_pixel.apply_linear_transposed(gp[m]);
      const Vec2 gw{gp[m].x * geom.px_scale.x, gp[m].y * geom.px_scale.y};
      const Vec2 p = geom.local[m];
      pg.transform[0] += gw.x * p.x;
      pg.transform[1] += gw.y * p.x;
      pg.transform[2] += gw.x * p.y;
      pg.transform[3] += gw.y * p.y;
      pg.transform[4] += gw.x;
      pg.transform[5] += gw.y;
    }
    pg.stroke_width = dhalf[i] * geom.stroke_scale / 2.0;
    // The stroke half width scales with sqrt|det| of the transform.
    const double det = t.a * t.d - t.b * t.c;
    if (dhalf[i] != 0.0 && det != 0.0) {
      const double hw = geom.stroke_width * geom.stroke_scale / 2.0;
      const double ddet = dhalf[i] * hw / (2.0 * det);
      pg.transform[0] += ddet * t.d;
      pg.transform[1] -= ddet * t.c;
      pg.transform[2] -= ddet * t.b;
      pg.transform[3] += ddet * t.a;
    }
  }
  return out;
}

}  // namespace svgsmith::raster

namespace svgsmith::raster {

RasterImage render(const Document& doc, const RenderConfig& cfg) {
  DiffRenderer r(cfg);
  auto frame = r.forward(doc);
  return r.image(*frame);
}

GradResult render_with_grad(const Document& doc, const RenderConfig& cfg, const ImageLoss& loss) {
  DiffRenderer r(cfg);
  auto frame = r.forward(doc);
  GradResult out;
  out.image = r.image(*frame);
  LossValue lv = loss(out.image);
  out.loss = lv.value;
  out.grads = r.backward(*frame, lv.image_grad);
  return out;
}

BinaryMask render_path_mask(const Path& path, const svg::Canvas& canvas, int resolution, int segments_per_curve) {
  RenderConfig cfg;
  cfg.resolution = resolution;
  const auto [w, h] = cfg.output_size(canvas);
  BinaryMask mask(w, h);
  const PathGeometry g = build_geometry(path, w / canvas.width, h / canvas.height, segments_per_curve);
  if (path.closed) {
    std::vector<std::pair<double, int>> crossings;
    for (int y = 0; y < h; ++y) {
      const double qy = y + 0.5;
      crossings.clear();
      for (const Seg& s : g.fill) {
        const Vec2 a = g.verts[s.a].p, b = g.verts[s.b].p;
        if ((a.y <= qy) != (b.y <= qy))
          crossings.emplace_back(a.x + (qy - a.y) * (b.x - a.x) / (b.y - a.y), b.y > a.y ? 1 : -1);
      }
      std::sort(crossings.begin(), crossings.end());
      std::size_t next = 0;
      int winding = 0;
      for (int x = 0; x < w; ++x) {
        while (next < crossings.size() && crossings[next].first < x + 0.5) winding += crossings[next++].second;
        if (winding != 0) mask.set(x, y);
      }
    }
    return mask;
  }
  const double hw = path.stroke.width * g.stroke_scale / 2.0;
  if (hw <= 0) return mask;
  for (const Seg& s : g.stroke) {
    const Vec2 a = g.verts[s.a].p, b = g.verts[s.b].p;
    auto to_index = [](double v, int hi) { return static_cast<int>(std::clamp(v, -1.0, hi + 1.0)); };
    const int x0 = std::max(0, to_index(std::floor(std::min(a.x, b.x) - hw), w));
    const int x1 = std::min(w - 1, to_index(std::ceil(std::max(a.x, b.x) + hw), w));
    const int y0 = std::max(0, to_index(std::floor(std::min(a.y, b.y) - hw), h));
    const int y1 = std::min(h - 1, to_index(std::ceil(std::max(a.y, b.y) + hw), h));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (!mask.get(x, y) && seg_distance({x + 0.5, y + 0.5}, a, b).d <= hw) mask.set(x, y);
  }
  return mask;
}

}  // namespace svgsmith::raster
