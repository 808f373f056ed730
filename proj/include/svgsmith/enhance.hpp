#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svgsmith/http_client.hpp"
#include "svgsmith/raster.hpp"
#include "svgsmith/svg.hpp"

namespace svgsmith::enhance {

enum class MaskSource { Template, Target };

struct MaskSet {
  std::vector<raster::BinaryMask> masks;
  MaskSource source = MaskSource::Template;
  /// Throws ArgumentError unless every mask has the same dimensions.
  void validate() const;
};

/// Separable Gaussian blur with clamped edges; radius ceil(3 sigma).
raster::RasterImage gaussian_blur(const raster::RasterImage& image, double sigma);

struct EnhancerRequest {
  std::vector<std::uint8_t> image_png;    ///< the template render
  std::vector<std::uint8_t> control_png;  ///< its blurred copy
  double strength = 0.5;                  ///< noise level in [0, 1]
};

EnhancerRequest make_request(const raster::RasterImage& templ, double strength = 0.5, double blur_sigma = 4.0);

class Enhancer {
 public:
  virtual ~Enhancer() = default;
  virtual raster::RasterImage enhance(const EnhancerRequest& req) = 0;
};

/// Returns a pre-supplied image; no network.
class FileEnhancer final : public Enhancer {
 public:
  explicit FileEnhancer(std::filesystem::path file) : file_(std::move(file)) {}
  raster::RasterImage enhance(const EnhancerRequest& req) override;

 private:
  std::filesystem::path file_;
};

/// Returns the request image unchanged (a stand-in for a service that keeps
/// the template as is).
class EchoEnhancer final : public Enhancer {
 public:
  raster::RasterImage enhance(const EnhancerRequest& req) override;
};

/// POSTs {"image", "control"} (base64 PNG) and {"strength"} as JSON; accepts
/// an image/png body or {"image": base64 PNG}.
class HttpEnhancer final : public Enhancer {
 public:
  explicit HttpEnhancer(std::string endpoint, util::HttpPolicy policy = {});
  raster::RasterImage enhance(const EnhancerRequest& req) override;

 private:
  std::string endpoint_;
  util::HttpPolicy policy_;
};

/// Runs the enhancer and checks the result has the expected size.
raster::RasterImage request_enhancement(const EnhancerRequest& req, Enhancer& enhancer, int width, int height);

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual MaskSet segment(const raster::RasterImage& image, MaskSource source) = 0;
};

/// Reads <dir>/template/*.png and <dir>/target/*.png (sorted by file name).
class DirectorySegmenter final : public Segmenter {
 public:
  explicit DirectorySegmenter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  MaskSet segment(const raster::RasterImage& image, MaskSource source) override;

 private:
  std::filesystem::path dir_;
};

/// POSTs the PNG; expects {"masks": [base64 PNG, ...]}.
class HttpSegmenter final : public Segmenter {
 public:
  explicit HttpSegmenter(std::string endpoint, util::HttpPolicy policy = {});
  MaskSet segment(const raster::RasterImage& image, MaskSource source) override;

 private:
  std::string endpoint_;
  util::HttpPolicy policy_;
};

MaskSet load_mask_dir(const std::filesystem::path& dir, MaskSource source);

double mask_iou(const raster::BinaryMask& a, const raster::BinaryMask& b);

struct FilterOptions {
  double threshold = 0.4;
  std::size_t min_area = 25;  ///< smaller target masks are speckle
};

/// Indices into tgt.masks of genuinely new regions: a target mask is kept
/// when it overlaps no template mask, or when its best IoU against the
/// template masks it overlaps is below the threshold.
std::vector<std::size_t> filter_new_mask_indices(const MaskSet& tpt, const MaskSet& tgt, const FilterOptions& opt = {});
std::vector<raster::BinaryMask> filter_new_masks(const MaskSet& tpt, const MaskSet& tgt, double threshold = 0.4,
                                                 std::size_t min_area = 25);

/// Pixel-corner outline of the largest 4-connected component, in pixel units,
/// clockwise on screen, starting at the top-left corner of its first pixel.
std::vector<Vec2> trace_outline(const raster::BinaryMask& mask);
/// Greedy closed-polygon simplification: each kept edge stays within `tol`
/// of the vertices it replaces. Never returns fewer than 3 vertices.
std::vector<Vec2> simplify_closed(const std::vector<Vec2>& loop, double tol);

inline const std::string kDetailLabel = "detail (auto)";

/// Closed straight-cubic polygon around the mask's largest component.
/// `tol` and the output are in canvas units (`canvas` maps the mask grid onto
/// the canvas). Fill is the mean target color under the mask when `target`
/// matches the mask size, black otherwise.
svg::Path mask_to_polygon(const raster::BinaryMask& mask, double tol, const raster::RasterImage* target = nullptr,
                          const svg::Canvas* canvas = nullptr);

/// Appends one polygon per mask above the existing paths and renumbers ids.
svg::Document add_detail_paths(const svg::Document& doc, const std::vector<raster::BinaryMask>& masks,
                               const raster::RasterImage& target, double tol = 1.0);

struct EnhanceOptions {
  double strength = 0.5;
  double blur_sigma = 4.0;
  FilterOptions filter;
  double polygon_tolerance = 1.0;
};

struct EnhanceResult {
  raster::RasterImage templ;   ///< I_tpt
  raster::RasterImage target;  ///< I_tgt
  std::vector<raster::BinaryMask> new_masks;
  svg::Document doc;  ///< input plus detail paths
};

/// Render, enhance, and (when a segmenter is given) add detail paths.
EnhanceResult enhance_template(const svg::Document& doc, const raster::RenderConfig& render, Enhancer& enhancer,
                               Segmenter* segmenter, const EnhanceOptions& opt = {});

}  // namespace svgsmith::enhance
