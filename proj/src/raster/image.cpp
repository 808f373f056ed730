#include <algorithm>
#include <cmath>
#include <numeric>

#include "svgsmith/raster.hpp"

namespace svgsmith::raster {

RasterImage::RasterImage(int w, int h, std::array<double, 3> fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = fill[i % 3];
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

void RenderConfig::validate() const {
  if (supersampling != 1 && supersampling != 2 && supersampling != 4)
    throw ArgumentError("supersampling must be 1, 2 or 4");
  if (!(smoothing_width > 0.0 && smoothing_width <= 2.0))
    throw ArgumentError("smoothing_width must be in (0, 2]");
  for (double c : background)
    if (!(c >= 0.0 && c <= 1.0)) throw ArgumentError("background channels must be in [0,1]");
  if (resolution < 0) throw ArgumentError("resolution must be >= 0");
  if (segments_per_curve < 1) throw ArgumentError("segments_per_curve must be >= 1");
}

std::pair<int, int> RenderConfig::output_size(const svg::Canvas& canvas) const {
  if (resolution == 0) return {static_cast<int>(std::lround(canvas.width)), static_cast<int>(std::lround(canvas.height))};
  // Keep the aspect ratio; the longer side gets `resolution` pixels.
  const double longest = std::max(canvas.width, canvas.height);
  return {static_cast<int>(std::lround(canvas.width / longest * resolution)),
          static_cast<int>(std::lround(canvas.height / longest * resolution))};
}

RasterImage quantize(const RasterImage& image) {
  RasterImage out = image;
  for (auto& v : out.rgb) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

}  // namespace svgsmith::raster
