#include <algorithm>
#include <cmath>
#include <limits>

#include "svgsmith/adam.hpp"
#include "svgsmith/optim.hpp"

namespace svgsmith::optim {
namespace {

using raster::BinaryMask;
using raster::DiffRenderer;
using raster::RasterImage;

std::vector<bool> resolve_active(const std::vector<bool>& active, std::size_t n) {
  if (active.empty()) return std::vector<bool>(n, true);
  if (active.size() != n)
    throw ArgumentError("active mask has " + std::to_string(active.size()) + " entries for " + std::to_string(n) +
                        " paths");
  return active;
}

// (closing point, move point) index pairs of closed subpaths that end on their start.
std::vector<std::pair<std::size_t, std::size_t>> closing_ties(const svg::Path& path) {
  std::vector<std::pair<std::size_t, std::size_t>> ties;
  if (!path.closed) return ties;
  const std::vector<Vec2> cp = path.control_points();
  std::size_t cursor = 0, start = 0, last = 0;
  bool open = false;
  auto finish = [&] {
    if (open && last != start && cp[last] == cp[start]) ties.emplace_back(last, start);
  };
  for (const auto& cmd : path.commands) {
    if (cmd.kind == svg::CommandKind::Move) {
      finish();
      start = last = cursor;
      open = true;
    } else {
      last = cursor + 2;
    }
    cursor += static_cast<std::size_t>(cmd.point_count());
  }
  finish();
  return ties;
}

int harmonic_freq(std::size_t r) {
  const int h = static_cast<int>(r / 4);
  return std::max(1, r % 4 < 2 ? h : h + 1);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Soft-IoU surrogate seeds for one path: d(1 - I/U)/d(coverage) scaled by `weight`.
std::vector<double> iou_seed(const std::vector<double>& cov, const BinaryMask& m0, double weight) {
  if (cov.size() != m0.bits.size()) return {};
  double inter = 0.0, sum_c = 0.0, sum_m = 0.0;
  for (std::size_t k = 0; k < cov.size(); ++k) {
    const double m = m0.bits[k] ? 1.0 : 0.0;
    inter += cov[k] * m;
    sum_c += cov[k];
    sum_m += m;
  }
  const double uni = sum_c + sum_m - inter;
  if (uni <= 0.0) return {};
  std::vector<double> seed(cov.size());
  const double u2 = uni * uni;
  for (std::size_t k = 0; k < cov.size(); ++k) {
    const double m = m0.bits[k] ? 1.0 : 0.0;
    seed[k] = -weight * (m * uni - inter * (1.0 - m)) / u2;
  }
  return seed;
}

double masked_iou(const svg::Document& doc, const std::vector<BinaryMask>& initial, const std::vector<bool>& active,
                  const raster::RenderConfig& render) {
  std::vector<BinaryMask> cur, ref;
  for (std::size_t i = 0; i < doc.paths.size(); ++i) {
    if (!active[i]) continue;
    cur.push_back(raster::render_path_mask(doc.paths[i], doc.canvas, render.resolution, render.segments_per_curve));
    ref.push_back(initial[i]);
  }
  return iou_loss(cur, ref);
}

bool finite_terms(const LossTerms& t) {
  return std::isfinite(t.total) && std::isfinite(t.mse) && std::isfinite(t.curvature) && std::isfinite(t.iou);
}

// Names the first active path whose gradient is not finite, or the first active path.
[[noreturn]] void fail_non_finite(const svg::Document& doc, const std::vector<bool>& active,
                                  const raster::ParamGradients* grads, const std::string& what) {
  for (std::size_t i = 0; i < doc.paths.size(); ++i) {
    if (!active[i]) continue;
    bool bad = false;
    for (const Vec2& p : doc.paths[i].control_points()) bad = bad || !is_finite(p);
    if (grads && i < grads->paths.size()) {
      for (const Vec2& g : grads->paths[i].points) bad = bad || !is_finite(g);
      for (double v : grads->paths[i].fill_rgb) bad = bad || !std::isfinite(v);
      for (double v : grads->paths[i].stroke_rgb) bad = bad || !std::isfinite(v);
      bad = bad || !std::isfinite(grads->paths[i].stroke_width);
    }
    if (bad) throw OptimizationError(doc.paths[i].id, what);
  }
  throw OptimizationError("", what);
}

void check_finite(const svg::Document& doc) {
  for (const auto& p : doc.paths) {
    for (const Vec2& v : p.control_points())
      if (!is_finite(v)) throw OptimizationError(p.id, "non-finite control point at stage entry");
    for (double v : p.transform.entries())
      if (!std::isfinite(v)) throw OptimizationError(p.id, "non-finite transform at stage entry");
  }
}

DiffRenderer::FramePtr forward_checked(const DiffRenderer& renderer, const svg::Document& doc) {
  try {
    return renderer.forward(doc);
  } catch (const RenderError& e) {
    throw OptimizationError(e.path_id(), "non-finite geometry during optimization");
  }
}

// Parameters of one path in the latent stage.
struct LatentSlot {
  std::size_t path = 0;
  std::optional<shape::LatentShape> latent;
  std::vector<Vec2> points;  // fixed geometry when there is no latent
  Vec2 pivot;
  std::size_t offset = 0;    // first entry in the flat vector
  std::size_t z_size = 0;
};

constexpr std::size_t kStyleParams = 7;      // fill rgb, stroke rgb, stroke width
constexpr std::size_t kTransformParams = 5;  // tx, ty, theta, sx, sy

Affine pivot_transform(Vec2 c, const double* t) {
  const double tx = t[0], ty = t[1], th = t[2], sx = t[3], sy = t[4];
  const double cs = std::cos(th), sn = std::sin(th);
  Affine m{sx * cs, sx * sn, -sy * sn, sy * cs, 0, 0};
  m.e = c.x + tx - (m.a * c.x + m.c * c.y);
  m.f = c.y + ty - (m.b * c.x + m.d * c.y);
  return m;
}

}  // namespace

StageResult optimize_latent(const svg::Document& doc, const std::vector<std::optional<shape::LatentShape>>& latents,
                            const RasterImage& target, const OptimizationConfig& cfg,
                            const shape::ShapeDecoder& decoder, const StageOptions& options) {
  cfg.validate();
  const std::size_t n = doc.paths.size();
  if (latents.size() != n)
    throw ArgumentError("expected one latent slot per path (" + std::to_string(latents.size()) + " for " +
                        std::to_string(n) + " paths)");
  const std::vector<bool> active = resolve_active(options.active, n);
  const auto [ow, oh] = cfg.render.output_size(doc.canvas);
  if (target.width != ow || target.height != oh)
    throw ArgumentError("target is " + std::to_string(target.width) + "x" + std::to_string(target.height) +
                        ", render size is " + std::to_string(ow) + "x" + std::to_string(oh));

  check_finite(doc);
  // Stage entry: bake active paths, swap in decoded geometry, initialize strokes.
  svg::Document cur = doc;
  std::vector<LatentSlot> slots;
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    svg::Path& p = cur.paths[i];
    p = svg::bake_transform(p);
    LatentSlot s;
    s.path = i;
    s.latent = latents[i];
    if (s.latent) {
      const svg::Path decoded = decoder.decode(*s.latent);
      p.commands = decoded.commands;
      p.closed = true;
      s.pivot = s.latent->frame.center;
      s.z_size = s.latent->z.size();
    } else {
      s.points = p.control_points();
      Vec2 c{};
      for (const Vec2& v : s.points) c += v;
      if (!s.points.empty()) c = c / static_cast<double>(s.points.size());
      s.pivot = c;
    }
    if (p.closed) {
      p.stroke.color = Rgba{0, 0, 0, 1};
      p.stroke.width = cfg.stroke_init_width;
    }
    s.offset = total;
    total += s.z_size + kStyleParams + kTransformParams;
    slots.push_back(std::move(s));
  }

  StageResult result;
  result.entry = cur;
  result.initial_masks = path_masks(cur, cfg.render);

  std::vector<double> params(total), rates(total);
  for (const auto& s : slots) {
    const svg::Path& p = cur.paths[s.path];
    double* x = params.data() + s.offset;
    double* r = rates.data() + s.offset;
    for (std::size_t k = 0; k < s.z_size; ++k) {
      x[k] = s.latent->z[k];
      const double f = harmonic_freq(k);
      r[k] = cfg.lr.latents / (f * f);
    }
    x += s.z_size;
    r += s.z_size;
    const double style[kStyleParams] = {p.fill.r, p.fill.g, p.fill.b, p.stroke.color.r, p.stroke.color.g,
                                        p.stroke.color.b, p.stroke.width};
    for (std::size_t k = 0; k < kStyleParams; ++k) {
      x[k] = style[k];
      r[k] = cfg.lr.colors;
    }
    x += kStyleParams;
    r += kStyleParams;
    const double ident[kTransformParams] = {0, 0, 0, 1, 1};
    for (std::size_t k = 0; k < kTransformParams; ++k) {
      x[k] = ident[k];
      r[k] = k < 2 ? cfg.lr.translation : cfg.lr.rotation_scale;
    }
  }

  auto build = [&](const std::vector<double>& x) {
    svg::Document d = cur;
    for (const auto& s : slots) {
      svg::Path& p = d.paths[s.path];
      const double* v = x.data() + s.offset;
      if (s.latent) {
        shape::LatentShape lat = *s.latent;
        lat.z.assign(v, v + s.z_size);
        p.set_control_points(decoder.decode_points(lat));
      }
      v += s.z_size;
      p.fill.r = v[0];
      p.fill.g = v[1];
      p.fill.b = v[2];
      p.stroke.color.r = v[3];
      p.stroke.color.g = v[4];
      p.stroke.color.b = v[5];
      p.stroke.width = v[6];
      p.transform = pivot_transform(s.pivot, v + kStyleParams);
    }
    return d;
  };
  auto bake_active = [&](svg::Document d) {
    for (const auto& s : slots) d.paths[s.path] = svg::bake_transform(d.paths[s.path]);
    return d;
  };

  const DiffRenderer renderer(cfg.render);
  Adam adam(total);
  const int iters = cfg.iters_per_stage;
  const double m_active = static_cast<double>(slots.size());
  double hard_iou = 0.0;
  double best = std::numeric_limits<double>::infinity();
  svg::Document best_doc = cur;

  for (int it = 0; it < iters; ++it) {
    const svg::Document d = build(params);
    const auto frame = forward_checked(renderer, d);
    const raster::LossValue mse = mse_with_grad(renderer.image(*frame), target);
    std::vector<std::vector<Vec2>> curv_grads(n);
    const double curv = curvature_loss(d, curv_grads, active);
    if (it % cfg.mask_interval == 0) hard_iou = masked_iou(d, result.initial_masks, active, cfg.render);

    LossTerms terms{mse.value + cfg.lambda1 * curv + cfg.lambda2 * hard_iou, mse.value, curv, hard_iou};
    if (!finite_terms(terms)) fail_non_finite(d, active, nullptr, "non-finite loss in latent stage");
    result.loss_trace.push_back(terms);
    if (terms.total < best) {
      best = terms.total;
      best_doc = d;
      result.best_iteration = it;
    }
    if (options.snapshot && options.snapshot_every > 0 && it % options.snapshot_every == 0)
      options.snapshot(it, bake_active(d));
    if (options.progress && !options.progress({"latent", it, iters, terms})) {
      result.cancelled = true;
      break;
    }
    if (it + 1 == iters) break;

    std::vector<std::vector<double>> seeds(n);
    if (cfg.lambda2 > 0.0 && m_active > 0.0)
      for (const auto& s : slots)
        seeds[s.path] = iou_seed(renderer.mask_coverage(*frame, s.path), result.initial_masks[s.path],
                                 cfg.lambda2 / m_active);
    const raster::ParamGradients g = renderer.backward(*frame, mse.image_grad, seeds);

    std::vector<double> grad(total, 0.0);
    for (const auto& s : slots) {
      const raster::PathGradients& pg = g.paths[s.path];
      double* gx = grad.data() + s.offset;
      if (s.latent) {
        std::vector<Vec2> pts = pg.points;
        const auto& cg = curv_grads[s.path];
        for (std::size_t k = 0; k < pts.size() && k < cg.size(); ++k) pts[k] += cg[k] * cfg.lambda1;
        shape::LatentShape lat = *s.latent;
        lat.z.assign(params.begin() + static_cast<std::ptrdiff_t>(s.offset),
                     params.begin() + static_cast<std::ptrdiff_t>(s.offset + s.z_size));
        const std::vector<double> gz = decoder.pullback(lat, pts);
        std::copy(gz.begin(), gz.end(), gx);
      }
      gx += s.z_size;
      for (int c = 0; c < 3; ++c) {
        gx[c] = pg.fill_rgb[c];
        gx[3 + c] = pg.stroke_rgb[c];
      }
      gx[6] = pg.stroke_width;
      gx += kStyleParams;

      // Chain d/d(a..f) through T = translate(c + t) R(theta) S(sx, sy) translate(-c).
      const double* tp = params.data() + s.offset + s.z_size + kStyleParams;
      const double th = tp[2], sx = tp[3], sy = tp[4];
      const double cs = std::cos(th), sn = std::sin(th);
      const Vec2 c = s.pivot;
      const auto& gt = pg.transform;
      const double ga = gt[0] - gt[4] * c.x, gb = gt[1] - gt[5] * c.x;
      const double gc = gt[2] - gt[4] * c.y, gd = gt[3] - gt[5] * c.y;
      gx[0] = gt[4];
      gx[1] = gt[5];
      gx[2] = ga * (-sx * sn) + gb * (sx * cs) + gc * (-sy * cs) + gd * (-sy * sn);
      gx[3] = ga * cs + gb * sn;
      gx[4] = -gc * sn + gd * cs;
    }
    for (double v : grad)
      if (!std::isfinite(v)) fail_non_finite(d, active, &g, "non-finite gradient in latent stage");

    adam.step(params, grad, rates);
    for (const auto& s : slots) {
      double* st = params.data() + s.offset + s.z_size;
      for (std::size_t k = 0; k < 6; ++k) st[k] = clamp01(st[k]);
      st[6] = std::max(0.0, st[6]);
    }
  }

  result.doc = bake_active(best_doc);
  return result;
}

StageResult optimize_points(const svg::Document& doc, const RasterImage& target, const OptimizationConfig& cfg,
                            const StageOptions& options) {
  cfg.validate();
  const std::size_t n = doc.paths.size();
  const std::vector<bool> active = resolve_active(options.active, n);
  const auto [ow, oh] = cfg.render.output_size(doc.canvas);
  if (target.width != ow || target.height != oh)
    throw ArgumentError("target is " + std::to_string(target.width) + "x" + std::to_string(target.height) +
                        ", render size is " + std::to_string(ow) + "x" + std::to_string(oh));

  check_finite(doc);
  svg::Document cur = doc;
  for (std::size_t i = 0; i < n; ++i)
    if (active[i]) cur.paths[i] = subdivide_midpoint(cur.paths[i]);

  StageResult result;
  result.entry = cur;
  result.initial_masks = path_masks(cur, cfg.render);

  struct Slot {
    std::size_t path;
    std::size_t offset;
    std::size_t points;
    std::vector<std::pair<std::size_t, std::size_t>> ties;
  };
  std::vector<Slot> slots;
  std::vector<double> params, rates;
  const bool colors = !cfg.freeze_colors;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const svg::Path& p = cur.paths[i];
    const std::vector<Vec2> cp = p.control_points();
    slots.push_back({i, params.size(), cp.size(), closing_ties(p)});
    for (const Vec2& v : cp) {
      params.push_back(v.x);
      params.push_back(v.y);
      rates.push_back(cfg.lr.points);
      rates.push_back(cfg.lr.points);
    }
    if (colors) {
      for (double v : {p.fill.r, p.fill.g, p.fill.b, p.stroke.color.r, p.stroke.color.g, p.stroke.color.b}) {
        params.push_back(v);
        rates.push_back(cfg.lr.colors);
      }
    }
  }

  std::vector<Vec2> pts;
  auto build = [&](const std::vector<double>& x) {
    svg::Document d = cur;
    for (const auto& s : slots) {
      svg::Path& p = d.paths[s.path];
      const double* v = x.data() + s.offset;
      pts.resize(s.points);
      for (std::size_t k = 0; k < s.points; ++k) pts[k] = {v[2 * k], v[2 * k + 1]};
      p.set_control_points(pts);
      if (colors) {
        const double* c = v + 2 * s.points;
        p.fill.r = c[0];
        p.fill.g = c[1];
        p.fill.b = c[2];
        p.stroke.color.r = c[3];
        p.stroke.color.g = c[4];
        p.stroke.color.b = c[5];
      }
    }
    return d;
  };

  const DiffRenderer renderer(cfg.render);
  Adam adam(params.size());
  const int iters = cfg.iters_per_stage;
  const int horizon = std::max(1, iters - 1);
  double hard_iou = 0.0;
  double best = std::numeric_limits<double>::infinity();
  svg::Document best_doc = cur;

  for (int it = 0; it < iters; ++it) {
    const svg::Document d = build(params);
    const auto frame = forward_checked(renderer, d);
    const raster::LossValue mse = mse_with_grad(renderer.image(*frame), target);
    std::vector<std::vector<Vec2>> curv_grads(n);
    const double curv = curvature_loss(d, curv_grads, active);
    const double lambda3 = lambda3_at(it, horizon, cfg.lambda3_start, cfg.lambda3_end);
    if (it % cfg.mask_interval == 0) hard_iou = masked_iou(d, result.initial_masks, active, cfg.render);

    LossTerms terms{mse.value + lambda3 * curv, mse.value, curv, hard_iou};
    if (!finite_terms(terms)) fail_non_finite(d, active, nullptr, "non-finite loss in point stage");
    result.loss_trace.push_back(terms);
    if (terms.total < best) {
      best = terms.total;
      best_doc = d;
      result.best_iteration = it;
    }
    if (options.snapshot && options.snapshot_every > 0 && it % options.snapshot_every == 0) options.snapshot(it, d);
    if (options.progress && !options.progress({"point", it, iters, terms})) {
      result.cancelled = true;
      break;
    }
    if (it + 1 == iters) break;

    const raster::ParamGradients g = renderer.backward(*frame, mse.image_grad);
    std::vector<double> grad(params.size(), 0.0);
    for (const auto& s : slots) {
      const raster::PathGradients& pg = g.paths[s.path];
      std::vector<Vec2> gp = pg.points;
      const auto& cg = curv_grads[s.path];
      for (std::size_t k = 0; k < gp.size() && k < cg.size(); ++k) gp[k] += cg[k] * lambda3;
      // A closed loop's end point and Move point move as one.
      for (const auto& [last, first] : s.ties) gp[first] = gp[last] = gp[first] + gp[last];
      double* gx = grad.data() + s.offset;
      for (std::size_t k = 0; k < s.points; ++k) {
        gx[2 * k] = gp[k].x;
        gx[2 * k + 1] = gp[k].y;
      }
      if (colors) {
        for (int c = 0; c < 3; ++c) {
          gx[2 * s.points + c] = pg.fill_rgb[c];
          gx[2 * s.points + 3 + c] = pg.stroke_rgb[c];
        }
      }
    }
    for (double v : grad)
      if (!std::isfinite(v)) fail_non_finite(d, active, &g, "non-finite gradient in point stage");

    adam.step(params, grad, rates);
    for (const auto& s : slots) {
      double* v = params.data() + s.offset;
      for (const auto& [last, first] : s.ties) {
        v[2 * last] = v[2 * first];
        v[2 * last + 1] = v[2 * first + 1];
      }
      if (colors)
        for (std::size_t k = 0; k < 6; ++k) v[2 * s.points + k] = clamp01(v[2 * s.points + k]);
    }
  }

  result.doc = best_doc;
  return result;
}

PipelineResult optimize_document(const svg::Document& doc, const RasterImage& target, const OptimizationConfig& cfg,
                                 const shape::ShapeDecoder& decoder, const PipelineOptions& options) {
  cfg.validate();
  const std::size_t n = doc.paths.size();
  const std::vector<bool> active = resolve_active(options.active, n);
  PipelineResult out;
  out.latents.resize(n);
  out.inversion_emd.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    if (options.progress && !options.progress({"inversion", static_cast<int>(i), static_cast<int>(n), {}})) {
      out.cancelled = true;
      out.doc = doc;
      return out;
    }
    if (!active[i] || !doc.paths[i].closed) continue;
    try {
      const shape::InversionResult inv = shape::invert(svg::bake_transform(doc.paths[i]), decoder, options.invert);
      out.latents[i] = inv.latent;
      out.inversion_emd[i] = inv.final_emd;
    } catch (const DegenerateShapeError&) {
      // Keeps its own points through the latent stage.
    }
  }

  StageOptions stage;
  stage.active = active;
  stage.progress = options.progress;
  stage.snapshot_every = options.snapshot_every;
  int offset = 0;
  if (options.snapshot)
    stage.snapshot = [&](int it, const svg::Document& d) { options.snapshot(offset + it, d); };

  out.latent = optimize_latent(doc, out.latents, target, cfg, decoder, stage);
  if (out.latent.cancelled) {
    out.cancelled = true;
    out.doc = out.latent.doc;
    return out;
  }
  offset = cfg.iters_per_stage;
  out.point = optimize_points(out.latent.doc, target, cfg, stage);
  out.cancelled = out.point.cancelled;
  out.doc = out.point.doc;
  return out;
}

}  // namespace svgsmith::optim
