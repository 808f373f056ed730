#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "svgsmith/svg.hpp"

namespace svgsmith::raster {

/// Row-major RGB image with channel values in [0,1].
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;  // 3 * width * height

  RasterImage() = default;
  RasterImage(int w, int h, std::array<double, 3> fill = {1, 1, 1});

  double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool operator==(const RasterImage&) const = default;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

struct RenderConfig {
  int supersampling = 2;         ///< samples per pixel side: 1, 2 or 4
  double smoothing_width = 1.0;  ///< soft-edge width in output pixels, (0, 2]
  std::array<double, 3> background{1, 1, 1};
  int resolution = 0;            ///< output size in pixels; 0 renders at canvas size
  int threads = 0;               ///< 0 = hardware concurrency
  int segments_per_curve = 16;   ///< flattening density for each cubic

  void validate() const;
  /// Output dimensions for a canvas.
  std::pair<int, int> output_size(const svg::Canvas& canvas) const;
};

/// Gradients for one path, mirroring its parameters.
struct PathGradients {
  std::vector<Vec2> points;  ///< one entry per control point (Path::control_points order)
  std::array<double, 3> fill_rgb{};
  std::array<double, 3> stroke_rgb{};
  double stroke_width = 0.0;
  std::array<double, 6> transform{};  ///< d/d(a b c d e f)
};

struct ParamGradients {
  std::vector<PathGradients> paths;
};

/// A scalar image loss and its gradient with respect to every channel value
/// (same layout as RasterImage::rgb).
struct LossValue {
  double value = 0.0;
  std::vector<double> image_grad;
};
using ImageLoss = std::function<LossValue(const RasterImage&)>;

RasterImage render(const svg::Document& doc, const RenderConfig& cfg = {});

struct GradResult {
  double loss = 0.0;
  RasterImage image;
  ParamGradients grads;
};
GradResult render_with_grad(const svg::Document& doc, const RenderConfig& cfg, const ImageLoss& loss);

/// Pixel set iff its center lies in the filled region (closed paths) or within
/// half the stroke width of the outline (open paths). `resolution` as in RenderConfig.
BinaryMask render_path_mask(const svg::Path& path, const svg::Canvas& canvas, int resolution = 0,
                            int segments_per_curve = 16);

/// Forward/backward rasterizer used by the optimizer. A Frame keeps the
/// per-layer coverage needed for the backward pass.
class DiffRenderer {
 public:
  explicit DiffRenderer(RenderConfig cfg);

  struct Frame;
  struct FrameDeleter {
    void operator()(Frame* f) const;
  };
  using FramePtr = std::unique_ptr<Frame, FrameDeleter>;

  FramePtr forward(const svg::Document& doc) const;
  const RasterImage& image(const Frame& frame) const;
  /// Per-pixel soft coverage of the region that defines the path's mask
  /// (fill for closed paths, stroke for open ones). Empty if the path has none.
  std::vector<double> mask_coverage(const Frame& frame, std::size_t path_index) const;
  /// `image_grad` is dLoss/dImage; `coverage_seeds[i]`, when non-empty, is
  /// dLoss/d(mask_coverage(i)) and is added to the geometric gradient.
  ParamGradients backward(const Frame& frame, std::span<const double> image_grad,
                          const std::vector<std::vector<double>>& coverage_seeds = {}) const;

  const RenderConfig& config() const { return cfg_; }

 private:
  RenderConfig cfg_;
};

// PNG import/export.
std::vector<std::uint8_t> encode_png(const RasterImage& image);
RasterImage decode_png(std::span<const std::uint8_t> bytes);
void write_png(const RasterImage& image, const std::filesystem::path& file);
RasterImage read_png(const std::filesystem::path& file);
/// Single-channel 0/255 PNG.
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes);
void write_mask_png(const BinaryMask& mask, const std::filesystem::path& file);
BinaryMask read_mask_png(const std::filesystem::path& file);

/// Rounds every channel to 8 bits, as a PNG round trip would.
RasterImage quantize(const RasterImage& image);

}  // namespace svgsmith::raster
