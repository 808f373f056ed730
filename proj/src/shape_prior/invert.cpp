#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "svgsmith/adam.hpp"
#include "svgsmith/shape_prior.hpp"

namespace svgsmith::shape {

InversionResult invert(const svg::Path& target, const ShapeDecoder& decoder, const InvertOptions& options) {
  if (options.samples < 2) throw ArgumentError("inversion needs at least 2 contour samples");
  if (options.iters < 0) throw ArgumentError("iteration count must be non-negative");
  const PointSet y = sample_contour(target, options.samples);

  LatentShape latent;
  latent.path_id = target.id;
  latent.frame = frame_for(target);
  latent.z.resize(decoder.dimension());
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, options.init_sigma);
  // Higher harmonics start smaller and move slower: the ten-cubic fit can
  // only follow them loosely, and letting them roam freely traps the
  // matching in tangled local minima.
  std::vector<double> rate_scale(latent.z.size());
  for (std::size_t r = 0; r < latent.z.size(); ++r) {
    const int h = static_cast<int>(r / 4);
    const int freq = std::max(1, r % 4 < 2 ? h : h + 1);
    rate_scale[r] = 1.0 / (static_cast<double>(freq) * freq);
    latent.z[r] = normal(rng) * rate_scale[r];
  }

  InversionResult result;
  result.latent = latent;
  Adam adam(latent.z.size());
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    const svg::Path decoded = decoder.decode(latent);
    const ContourSampler sampler(decoded, options.samples);
    const PointSet& x = sampler.points();
    const Assignment a = emd_assignment(x, y);
    result.trace.push_back(a.cost);
    if (it == 0) result.initial_emd = a.cost;
    if (a.cost < best) {
      best = a.cost;
      result.latent = latent;
    }
    if (it == options.iters) break;

    // Gradient through the fixed matching (locally constant).
    std::vector<Vec2> sample_grads(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Vec2 d = x[i] - y[a.match[i]];
      const double len = norm(d);
      if (len > 0.0) sample_grads[i] = d / len;
    }
    const std::vector<Vec2> grads = sampler.pullback(sample_grads);
    const std::vector<double> gz = decoder.pullback(latent, grads);
    // Cosine decay to 2% of the base rate lets the fit settle below a pixel.
    const double progress = options.iters > 1 ? static_cast<double>(it) / (options.iters - 1) : 1.0;
    const double lr = options.lr * (0.02 + 0.98 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    std::vector<double> rates(rate_scale.size());
    for (std::size_t r = 0; r < rates.size(); ++r) rates[r] = lr * rate_scale[r];
    adam.step(latent.z, gz, rates);
  }
  result.final_emd = best;
  return result;
}

InversionResult invert(const svg::Path& target, int n, int iters) {
  static const FourierDecoder decoder;
  InvertOptions options;
  options.samples = n;
  options.iters = iters;
  return invert(target, decoder, options);
}

}  // namespace svgsmith::shape
