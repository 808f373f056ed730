#include <algorithm>
#include <json.hpp>

#include "svgsmith/enhance.hpp"
#include "svgsmith/error.hpp"
#include "svgsmith/util.hpp"

namespace svgsmith::enhance {

using nlohmann::json;
using raster::RasterImage;

namespace {

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string as_string(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

json parse_json(const std::string& body, const char* what) {
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    throw FormatError(std::string(what) + " returned malformed JSON", body.substr(0, 512));
  }
}

}  // namespace

EnhancerRequest make_request(const RasterImage& templ, double strength, double blur_sigma) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw ArgumentError("strength must lie in [0, 1]");
  EnhancerRequest req;
  req.image_png = raster::encode_png(templ);
  req.control_png = raster::encode_png(gaussian_blur(templ, blur_sigma));
  req.strength = strength;
  return req;
}

RasterImage FileEnhancer::enhance(const EnhancerRequest&) { return raster::read_png(file_); }

RasterImage EchoEnhancer::enhance(const EnhancerRequest& req) { return raster::decode_png(req.image_png); }

HttpEnhancer::HttpEnhancer(std::string endpoint, util::HttpPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(policy) {
  if (endpoint_.empty()) throw ConfigError("enhancer endpoint is empty");
}

RasterImage HttpEnhancer::enhance(const EnhancerRequest& req) {
  const json body = {{"image", util::base64_encode(req.image_png)},
                     {"control", util::base64_encode(req.control_png)},
                     {"strength", req.strength}};
  const auto res = util::http_post(endpoint_, body.dump(), "application/json", {}, policy_);
  if (res.status != 200)
    throw TransportError("enhancer returned HTTP " + std::to_string(res.status));
  if (res.content_type.rfind("image/png", 0) == 0) return raster::decode_png(bytes_of(res.body));
  const json reply = parse_json(res.body, "enhancer");
  if (!reply.is_object() || !reply.contains("image") || !reply["image"].is_string())
    throw FormatError("enhancer reply has no image", res.body.substr(0, 512));
  return raster::decode_png(util::base64_decode(reply["image"].get<std::string>()));
}

RasterImage request_enhancement(const EnhancerRequest& req, Enhancer& enhancer, int width, int height) {
  RasterImage out = enhancer.enhance(req);
  if (out.width != width || out.height != height)
    throw FormatError("enhanced image is " + std::to_string(out.width) + "x" + std::to_string(out.height) +
                          ", expected " + std::to_string(width) + "x" + std::to_string(height),
                      "");
  return out;
}

MaskSet load_mask_dir(const std::filesystem::path& dir, MaskSource source) {
  if (!std::filesystem::is_directory(dir)) throw IoError("mask directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  MaskSet set;
  set.source = source;
  for (const auto& f : files) set.masks.push_back(raster::read_mask_png(f));
  set.validate();
  return set;
}

MaskSet DirectorySegmenter::segment(const RasterImage& image, MaskSource source) {
  MaskSet set = load_mask_dir(dir_ / (source == MaskSource::Template ? "template" : "target"), source);
  for (const auto& m : set.masks)
    if (m.width != image.width || m.height != image.height)
      throw ArgumentError("mask size does not match the image");
  return set;
}

HttpSegmenter::HttpSegmenter(std::string endpoint, util::HttpPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(policy) {
  if (endpoint_.empty()) throw ConfigError("segmenter endpoint is empty");
}

MaskSet HttpSegmenter::segment(const RasterImage& image, MaskSource source) {
  const auto res = util::http_post(endpoint_, as_string(raster::encode_png(image)), "image/png", {}, policy_);
  if (res.status != 200) throw TransportError("segmenter returned HTTP " + std::to_string(res.status));
  const json reply = parse_json(res.body, "segmenter");
  if (!reply.is_object() || !reply.contains("masks") || !reply["masks"].is_array())
    throw FormatError("segmenter reply has no mask list", res.body.substr(0, 512));
  MaskSet set;
  set.source = source;
  for (const auto& m : reply["masks"]) {
    if (!m.is_string()) throw FormatError("segmenter mask is not a string", res.body.substr(0, 512));
    set.masks.push_back(raster::decode_mask_png(util::base64_decode(m.get<std::string>())));
    if (set.masks.back().width != image.width || set.masks.back().height != image.height)
      throw FormatError("segmenter mask size does not match the image", "");
  }
  return set;
}

EnhanceResult enhance_template(const svg::Document& doc, const raster::RenderConfig& render, Enhancer& enhancer,
                               Segmenter* segmenter, const EnhanceOptions& opt) {
  EnhanceResult out;
  out.templ = raster::render(doc, render);
  out.target = request_enhancement(make_request(out.templ, opt.strength, opt.blur_sigma), enhancer,
                                   out.templ.width, out.templ.height);
  out.doc = doc;
  if (!segmenter) return out;
  const MaskSet tpt = segmenter->segment(out.templ, MaskSource::Template);
  const MaskSet tgt = segmenter->segment(out.target, MaskSource::Target);
  out.new_masks = filter_new_masks(tpt, tgt, opt.filter.threshold, opt.filter.min_area);
  out.doc = add_detail_paths(doc, out.new_masks, out.target, opt.polygon_tolerance);
  return out;
}

}  // namespace svgsmith::enhance
