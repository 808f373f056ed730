#include <cmath>
#include <sstream>

#include "svgsmith/optim.hpp"

namespace svgsmith::optim {

void OptimizationConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be a finite value >= 0");
  };
  nonneg(lambda1, "lambda1");
  nonneg(lambda2, "lambda2");
  nonneg(lambda3_start, "lambda3_start");
  nonneg(lambda3_end, "lambda3_end");
  if (lambda3_start < lambda3_end) throw ArgumentError("lambda3_start must be >= lambda3_end");
  if (iters_per_stage < 1) throw ArgumentError("iters_per_stage must be >= 1");
  if (mask_interval < 1) throw ArgumentError("mask_interval must be >= 1");
  for (double v : {lr.points, lr.latents, lr.colors, lr.translation, lr.rotation_scale}) nonneg(v, "learning rate");
  nonneg(stroke_init_width, "stroke_init_width");
  render.validate();
}

double curvature_loss(const svg::Document& doc) {
  std::vector<std::vector<Vec2>> unused;
  return curvature_loss(doc, unused);
}

double curvature_loss(const svg::Document& doc, std::vector<std::vector<Vec2>>& grads,
                      const std::vector<bool>& include) {
  const bool want_grad = !grads.empty();
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < doc.paths.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    const std::vector<Vec2> v = doc.paths[i].control_points();
    if (v.size() < 3) continue;
    count += static_cast<double>(v.size() - 2);
    for (std::size_t j = 0; j + 2 < v.size(); ++j) sum += norm2(v[j] - v[j + 1] * 2.0 + v[j + 2]);
  }
  if (count == 0.0) return 0.0;
  if (want_grad) {
    for (std::size_t i = 0; i < doc.paths.size(); ++i) {
      if (!include.empty() && !include[i]) continue;
      const std::vector<Vec2> v = doc.paths[i].control_points();
      if (v.size() < 3) continue;
      auto& g = grads[i];
      g.resize(v.size());
      for (std::size_t j = 0; j + 2 < v.size(); ++j) {
        const Vec2 r = (v[j] - v[j + 1] * 2.0 + v[j + 2]) * (2.0 / count);
        g[j] += r;
        g[j + 1] -= r * 2.0;
        g[j + 2] += r;
      }
    }
  }
  return sum / count;
}

double iou_loss(const std::vector<raster::BinaryMask>& current, const std::vector<raster::BinaryMask>& initial) {
  if (current.size() != initial.size())
    throw ArgumentError("IoU needs one initial mask per current mask (" + std::to_string(current.size()) + " vs " +
                        std::to_string(initial.size()) + ")");
  if (current.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const auto& a = current[i];
    const auto& b = initial[i];
    if (a.width != b.width || a.height != b.height) throw ArgumentError("IoU masks differ in size");
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.bits.size(); ++k) {
      const bool x = a.bits[k] != 0, y = b.bits[k] != 0;
      inter += x && y;
      uni += x || y;
    }
    sum += uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
  }
  return sum / static_cast<double>(current.size());
}

namespace {
void check_same_size(const raster::RasterImage& img, const raster::RasterImage& target) {
  if (img.width != target.width || img.height != target.height)
    throw ArgumentError("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) + ", target is " +
                        std::to_string(target.width) + "x" + std::to_string(target.height));
}
}  // namespace

double mse_loss(const raster::RasterImage& img, const raster::RasterImage& target) {
  check_same_size(img, target);
  if (img.rgb.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < img.rgb.size(); ++k) {
    const double d = img.rgb[k] - target.rgb[k];
    sum += d * d;
  }
  return sum / static_cast<double>(img.rgb.size());
}

raster::LossValue mse_with_grad(const raster::RasterImage& img, const raster::RasterImage& target) {
  check_same_size(img, target);
  raster::LossValue out;
  out.image_grad.resize(img.rgb.size());
  if (img.rgb.empty()) return out;
  const double n = static_cast<double>(img.rgb.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < img.rgb.size(); ++k) {
    const double d = img.rgb[k] - target.rgb[k];
    sum += d * d;
    out.image_grad[k] = 2.0 * d / n;
  }
  out.value = sum / n;
  return out;
}

double lambda3_at(int t, int T, double start, double end) {
  if (T < 1) throw ArgumentError("schedule length must be >= 1");
  if (t < 0 || t > T)
    throw ArgumentError("iteration " + std::to_string(t) + " outside schedule [0, " + std::to_string(T) + "]");
  const double u = static_cast<double>(t) / T;
  return start + (end - start) * u;
}

svg::Path subdivide_midpoint(const svg::Path& path) {
  svg::Path out = path;
  out.commands.clear();
  Vec2 cur{};
  for (const auto& cmd : path.commands) {
    if (cmd.kind == svg::CommandKind::Move) {
      out.commands.push_back(cmd);
      cur = cmd.pts[0];
      continue;
    }
    const Vec2 p0 = cur, p1 = cmd.pts[0], p2 = cmd.pts[1], p3 = cmd.pts[2];
    const Vec2 a = (p0 + p1) * 0.5, b = (p1 + p2) * 0.5, c = (p2 + p3) * 0.5;
    const Vec2 ab = (a + b) * 0.5, bc = (b + c) * 0.5;
    const Vec2 mid = (ab + bc) * 0.5;
    out.commands.push_back(svg::Command::cubic(a, ab, mid));
    out.commands.push_back(svg::Command::cubic(bc, c, p3));
    cur = p3;
  }
  return out;
}

std::vector<raster::BinaryMask> path_masks(const svg::Document& doc, const raster::RenderConfig& render) {
  std::vector<raster::BinaryMask> masks;
  masks.reserve(doc.paths.size());
  for (const auto& p : doc.paths)
    masks.push_back(raster::render_path_mask(p, doc.canvas, render.resolution, render.segments_per_curve));
  return masks;
}

void write_trace_csv(std::ostream& out, const std::vector<LossTerms>& trace) {
  out << "iteration,total,mse,curvature,iou\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& t = trace[i];
    out << i << ',' << svg::format_number(t.total) << ',' << svg::format_number(t.mse) << ','
        << svg::format_number(t.curvature) << ',' << svg::format_number(t.iou) << '\n';
  }
}

}  // namespace svgsmith::optim
