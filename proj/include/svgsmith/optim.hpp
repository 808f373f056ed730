#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "svgsmith/raster.hpp"
#include "svgsmith/shape_prior.hpp"
#include "svgsmith/svg.hpp"

namespace svgsmith::optim {

struct LearningRates {
  double points = 0.5;
  double latents = 0.05;
  double colors = 0.01;
  double translation = 0.5;
  double rotation_scale = 0.005;
};

struct OptimizationConfig {
  double lambda1 = 5e-4;  ///< curvature weight, latent stage
  double lambda2 = 5e-6;  ///< IoU weight, latent stage
  double lambda3_start = 1e-3;  ///< curvature weight at the first point-stage iteration
  double lambda3_end = 5e-5;    ///< ... and at the last
  int iters_per_stage = 500;
  LearningRates lr;
  raster::RenderConfig render;
  int mask_interval = 10;      ///< hard IoU masks are recomputed this often
  bool freeze_colors = false;  ///< point stage keeps colors fixed
  double stroke_init_width = 0.8;

  void validate() const;
};

struct LossTerms {
  double total = 0.0;
  double mse = 0.0;
  double curvature = 0.0;
  double iou = 0.0;
  bool operator==(const LossTerms&) const = default;
};

struct Progress {
  std::string stage;
  int iteration = 0;
  int iterations = 0;
  LossTerms loss;
};
/// Returning false stops the run after the current iteration.
using ProgressFn = std::function<bool(const Progress&)>;
using SnapshotFn = std::function<void(int iteration, const svg::Document& doc)>;

struct StageOptions {
  /// Paths to optimize; empty means all. Inactive paths are rendered but never changed.
  std::vector<bool> active;
  ProgressFn progress;
  SnapshotFn snapshot;
  int snapshot_every = 0;
};

struct StageResult {
  svg::Document doc;            ///< best-loss document
  svg::Document entry;          ///< document as initialized at stage entry, before any update
  std::vector<LossTerms> loss_trace;
  std::vector<raster::BinaryMask> initial_masks;  ///< m_i^0, one per path
  int best_iteration = 0;
  bool cancelled = false;
};

/// Sum over paths of squared second differences of the control-point
/// sequence (Move point, then each cubic's three points), divided by the
/// total number of second differences. Paths with fewer than 3 points are
/// skipped; 0 when no path qualifies.
double curvature_loss(const svg::Document& doc);
/// Same value; adds d(value)/d(control point) into `grads` (one vector per path).
double curvature_loss(const svg::Document& doc, std::vector<std::vector<Vec2>>& grads,
                      const std::vector<bool>& include = {});

/// Mean over paths of 1 - IoU(current, initial); empty-vs-empty counts as IoU 1.
double iou_loss(const std::vector<raster::BinaryMask>& current, const std::vector<raster::BinaryMask>& initial);
double mse_loss(const raster::RasterImage& img, const raster::RasterImage& target);
raster::LossValue mse_with_grad(const raster::RasterImage& img, const raster::RasterImage& target);

double lambda3_at(int t, int T, double start = 1e-3, double end = 5e-5);

/// Splits every cubic at t = 0.5.
svg::Path subdivide_midpoint(const svg::Path& path);

std::vector<raster::BinaryMask> path_masks(const svg::Document& doc, const raster::RenderConfig& render);

/// Latent stage: jointly optimizes latents, fill and stroke colors, stroke
/// widths and per-path transforms. `latents[i]` empty keeps path i's points
/// fixed (open paths have no latent). Transforms are baked on return.
StageResult optimize_latent(const svg::Document& doc, const std::vector<std::optional<shape::LatentShape>>& latents,
                            const raster::RasterImage& target, const OptimizationConfig& cfg,
                            const shape::ShapeDecoder& decoder, const StageOptions& options = {});

/// Point stage: subdivides active paths once, then optimizes control points
/// (and colors unless frozen) with a linearly decaying curvature weight.
StageResult optimize_points(const svg::Document& doc, const raster::RasterImage& target,
                            const OptimizationConfig& cfg, const StageOptions& options = {});

struct PipelineOptions {
  shape::InvertOptions invert;
  std::vector<bool> active;
  ProgressFn progress;
  SnapshotFn snapshot;
  int snapshot_every = 0;
};

struct PipelineResult {
  std::vector<std::optional<shape::LatentShape>> latents;
  std::vector<double> inversion_emd;  ///< final EMD per path, NaN when not inverted
  StageResult latent;
  StageResult point;
  svg::Document doc;
  bool cancelled = false;
};

/// Latent inversion of every active closed path, then both stages.
PipelineResult optimize_document(const svg::Document& doc, const raster::RasterImage& target,
                                 const OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                                 const PipelineOptions& options = {});

/// CSV with header iteration,total,mse,curvature,iou.
void write_trace_csv(std::ostream& out, const std::vector<LossTerms>& trace);

}  // namespace svgsmith::optim
