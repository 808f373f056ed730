#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <random>
#include <thread>

#include "../common/masks.hpp"
#include "svgsmith/enhance.hpp"
#include "svgsmith/util.hpp"

using namespace svgsmith;
using raster::BinaryMask;
using raster::RasterImage;
using testing::brute_force_filter;
using testing::connected_blob;
using testing::disk_mask;
using testing::random_blob;
using testing::rect_mask;

namespace {

RasterImage gradient_image(int w, int h) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = double(x) / w;
      img.at(x, y, 1) = double(y) / h;
      img.at(x, y, 2) = 0.5;
    }
  return img;
}

svg::Document one_rect_doc(double size) {
  svg::Document doc;
  doc.canvas = {size, size};
  svg::Path p;
  p.id = "path_1";
  p.closed = true;
  p.fill = {0.2, 0.4, 0.6, 1};
  const Vec2 a{8, 8}, b{40, 8}, c{40, 40}, d{8, 40};
  p.commands = {svg::Command::move(a), svg::Command::line(a, b), svg::Command::line(b, c), svg::Command::line(c, d),
                svg::Command::line(d, a)};
  doc.paths.push_back(p);
  return doc;
}

}  // namespace

TEST_CASE("blur control image") {
  const RasterImage img = gradient_image(32, 32);
  RasterImage checker(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) checker.at(x, y, c) = (x / 4 + y / 4) % 2;
  const RasterImage blurred = enhance::gaussian_blur(checker, 4.0);
  double diff = 0.0;
  for (std::size_t i = 0; i < checker.rgb.size(); ++i) diff += std::abs(blurred.rgb[i] - checker.rgb[i]);
  CHECK(diff / checker.rgb.size() > 0.1);

  // Constant images are fixed points of a normalized kernel.
  const RasterImage flat(16, 16, {0.3, 0.6, 0.9});
  const RasterImage fb = enhance::gaussian_blur(flat, 4.0);
  for (std::size_t i = 0; i < flat.rgb.size(); ++i) CHECK(fb.rgb[i] == doctest::Approx(flat.rgb[i]).epsilon(1e-12));

  // Interior pixel against a direct 2-D convolution.
  double acc = 0.0, wsum = 0.0;
  for (int dy = -12; dy <= 12; ++dy)
    for (int dx = -12; dx <= 12; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / 32.0);
      acc += w * checker.at(std::clamp(16 + dx, 0, 31), std::clamp(16 + dy, 0, 31), 0);
      wsum += w;
    }
  CHECK(blurred.at(16, 16, 0) == doctest::Approx(acc / wsum).epsilon(1e-9));

  const auto req = enhance::make_request(img, 0.5);
  CHECK(raster::decode_png(req.image_png) == raster::quantize(img));
  CHECK(req.control_png != req.image_png);
  CHECK_THROWS_AS(enhance::make_request(img, 1.5), ArgumentError);
  CHECK_THROWS_AS(enhance::gaussian_blur(img, 0.0), ArgumentError);
}

TEST_CASE("file mode returns the supplied image") {
  const auto dir = std::filesystem::temp_directory_path() / "svgsmith_enhance_file";
  std::filesystem::create_directories(dir);
  const RasterImage supplied = raster::quantize(gradient_image(24, 24));
  raster::write_png(supplied, dir / "target.png");
  enhance::FileEnhancer fe(dir / "target.png");
  const auto req = enhance::make_request(RasterImage(24, 24), 0.5);
  CHECK(enhance::request_enhancement(req, fe, 24, 24) == supplied);
  CHECK_THROWS_AS(enhance::request_enhancement(req, fe, 32, 32), FormatError);
  enhance::FileEnhancer missing(dir / "nope.png");
  CHECK_THROWS_AS(enhance::request_enhancement(req, missing, 24, 24), IoError);
}

TEST_CASE("http enhancer and segmenter") {
  httplib::Server server;
  double seen_strength = -1;
  server.Post("/echo", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    seen_strength = body["strength"].get<double>();
    const auto png = util::base64_decode(body["image"].get<std::string>());
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  });
  server.Post("/json", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    res.set_content(nlohmann::json{{"image", body["image"]}}.dump(), "application/json");
  });
  server.Post("/sam", [&](const httplib::Request& req, httplib::Response& res) {
    const auto img = raster::decode_png(
        std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()));
    const auto m = rect_mask(img.width, img.height, 1, 1, 5, 5);
    res.set_content(nlohmann::json{{"masks", {util::base64_encode(raster::encode_mask_png(m))}}}.dump(),
                    "application/json");
  });
  server.Post("/down", [&](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  util::HttpPolicy fast{5.0, 1, 1};

  const RasterImage tpt = raster::quantize(gradient_image(20, 20));
  const auto req = enhance::make_request(tpt, 0.3);
  enhance::HttpEnhancer echo(base + "/echo", fast);
  CHECK(enhance::request_enhancement(req, echo, 20, 20) == tpt);
  CHECK(seen_strength == doctest::Approx(0.3));
  enhance::HttpEnhancer js(base + "/json", fast);
  CHECK(enhance::request_enhancement(req, js, 20, 20) == tpt);
  enhance::HttpEnhancer down(base + "/down", fast);
  CHECK_THROWS_AS(enhance::request_enhancement(req, down, 20, 20), TransportError);

  enhance::HttpSegmenter sam(base + "/sam", fast);
  const auto set = sam.segment(tpt, enhance::MaskSource::Target);
  REQUIRE(set.masks.size() == 1);
  CHECK(set.masks[0].count() == 16);
  CHECK(set.source == enhance::MaskSource::Target);
  CHECK_THROWS_AS(enhance::HttpEnhancer(""), ConfigError);

  server.stop();
  th.join();
}

TEST_CASE("filter examples") {
  const BinaryMask a = rect_mask(64, 64, 0, 0, 20, 20);
  const BinaryMask far = rect_mask(64, 64, 40, 40, 60, 60);
  // 10x10 inside a: IoU 100/400 = 0.25.
  const BinaryMask part = rect_mask(64, 64, 0, 0, 10, 10);
  enhance::MaskSet tpt{{a}, enhance::MaskSource::Template};
  enhance::MaskSet tgt{{a, far, part, rect_mask(64, 64, 30, 0, 34, 4)}, enhance::MaskSource::Target};
  const auto idx = enhance::filter_new_mask_indices(tpt, tgt);
  // identical -> out, disjoint -> in, IoU .25 -> in, 16 px speckle -> out
  CHECK(idx == std::vector<std::size_t>{1, 2});
  CHECK(enhance::filter_new_masks(tpt, tgt).size() == 2);
  CHECK(enhance::filter_new_mask_indices(tpt, tgt, {0.2, 25}) == std::vector<std::size_t>{1});

  enhance::MaskSet odd{{BinaryMask(32, 32)}, enhance::MaskSource::Target};
  CHECK_THROWS_AS(enhance::filter_new_masks(tpt, odd), ArgumentError);
  CHECK_THROWS_AS(enhance::filter_new_masks(tpt, tgt, 1.0), ArgumentError);
  CHECK(enhance::mask_iou(a, part) == doctest::Approx(0.25));
}

TEST_CASE("filter agrees with brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    enhance::MaskSet tpt{{}, enhance::MaskSource::Template}, tgt{{}, enhance::MaskSource::Target};
    const int q = rng() % 21, k = rng() % 21;
    for (int i = 0; i < q; ++i) tpt.masks.push_back(random_blob(rng, 64));
    for (int i = 0; i < k; ++i) tgt.masks.push_back(rng() % 4 == 0 && q > 0 ? tpt.masks[rng() % q] : random_blob(rng, 64));
    const double th = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    CHECK(enhance::filter_new_mask_indices(tpt, tgt, {th, 25}) == brute_force_filter(tpt, tgt, th, 25));
  }
}

TEST_CASE("polygon tracing") {
  SUBCASE("square") {
    const auto path = enhance::mask_to_polygon(rect_mask(32, 32, 5, 7, 15, 17), 0.5);
    REQUIRE(path.commands.size() == 5);
    CHECK(path.closed);
    CHECK(path.semantic_label == "detail (auto)");
    const std::vector<Vec2> corners{{5, 7}, {15, 7}, {15, 17}, {5, 17}};
    for (const auto& c : corners) {
      bool found = false;
      for (const auto& cmd : path.commands)
        found = found || norm(cmd.end_point() - c) <= 0.5;
      CHECK(found);
    }
    CHECK(path.commands.back().end_point() == path.commands.front().pts[0]);
  }
  SUBCASE("single pixel") {
    const auto path = enhance::mask_to_polygon(rect_mask(8, 8, 3, 4, 4, 5), 0.5);
    CHECK(path.commands.size() == 5);
    CHECK(path.commands[0].pts[0] == Vec2{3, 4});
  }
  SUBCASE("disk") {
    const BinaryMask d = disk_mask(64, 32, 32, 20);
    const auto path = enhance::mask_to_polygon(d, 1.0);
    const int verts = static_cast<int>(path.commands.size()) - 1;
    CHECK(verts >= 8);
    CHECK(verts <= 64);
    double worst = 0.0;
    Vec2 prev = path.commands[0].pts[0];
    for (std::size_t i = 1; i < path.commands.size(); ++i) {
      const Vec2 end = path.commands[i].end_point();
      for (int s = 0; s <= 50; ++s) worst = std::max(worst, std::abs(norm(lerp(prev, end, s / 50.0) - Vec2{32, 32}) - 20));
      prev = end;
    }
    CHECK(worst <= 1.5);
  }
  SUBCASE("largest component and color") {
    BinaryMask m = rect_mask(32, 32, 0, 0, 3, 3);
    const BinaryMask big = rect_mask(32, 32, 10, 10, 20, 14);
    for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] |= big.bits[i];
    RasterImage target(32, 32, {0.0, 0.0, 0.0});
    for (int y = 10; y < 14; ++y)
      for (int x = 10; x < 20; ++x) target.at(x, y, 0) = 1.0;
    const auto path = enhance::mask_to_polygon(m, 0.5, &target);
    CHECK(path.commands[0].pts[0] == Vec2{10, 10});
    // 40 red pixels out of 49 under the whole mask.
    CHECK(path.fill.r == doctest::Approx(40.0 / 49.0));
    CHECK(path.fill.g == 0.0);
  }
  CHECK_THROWS_AS(enhance::mask_to_polygon(BinaryMask(8, 8), 1.0), DegenerateShapeError);
}

TEST_CASE("polygon re-rasterizes close to the mask") {
  std::mt19937_64 rng(5);
  const svg::Canvas canvas{64, 64};
  int tested = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const BinaryMask m = connected_blob(rng, 64);
    if (m.count() < 50) continue;
    const auto path = enhance::mask_to_polygon(m, 1.0, nullptr, &canvas);
    const BinaryMask back = raster::render_path_mask(path, canvas, 64);
    ++tested;
    CHECK(enhance::mask_iou(back, m) >= 0.85);
  }
  CHECK(tested > 30);
}

TEST_CASE("detail paths appended on top") {
  const svg::Document doc = one_rect_doc(48);
  const RasterImage target(48, 48, {1, 0, 0});
  CHECK(enhance::add_detail_paths(doc, {}, target) == doc);

  svg::Document big;
  big.canvas = {48, 48};
  for (int i = 1; i <= 14; ++i) {
    svg::Path p = doc.paths[0];
    p.id = svg::path_id(i);
    big.paths.push_back(p);
  }
  const auto out = enhance::add_detail_paths(big, {rect_mask(48, 48, 20, 20, 30, 30), rect_mask(48, 48, 0, 0, 6, 6)},
                                             target);
  REQUIRE(out.paths.size() == 16);
  CHECK(out.paths[14].id == "path_15");
  CHECK(out.paths[15].id == "path_16");
  CHECK(out.paths[15].semantic_label == "detail (auto)");
  const auto reparsed = svg::parse_svg(svg::serialize(out));
  CHECK(reparsed.doc.paths.size() == 16);
  CHECK(reparsed.doc.paths[15].id == "path_16");

  // Painter's order: the detail covers the rect where they overlap.
  const auto img = raster::render(out, {1, 1.0, {1, 1, 1}, 48, 1, 16});
  CHECK(img.at(25, 25, 0) == doctest::Approx(1.0));
  CHECK(img.at(25, 25, 2) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("enhance_template is deterministic in file mode") {
  const auto dir = std::filesystem::temp_directory_path() / "svgsmith_enhance_pipeline";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "masks" / "template");
  std::filesystem::create_directories(dir / "masks" / "target");
  const svg::Document doc = one_rect_doc(48);
  RasterImage target = raster::render(doc, {2, 1.0, {1, 1, 1}, 48, 1, 16});
  for (int y = 30; y < 44; ++y)
    for (int x = 30; x < 44; ++x) target.at(x, y, 0) = 0.9, target.at(x, y, 1) = 0.1, target.at(x, y, 2) = 0.1;
  target = raster::quantize(target);
  raster::write_png(target, dir / "target.png");
  raster::write_mask_png(rect_mask(48, 48, 8, 8, 40, 40), dir / "masks" / "template" / "000.png");
  raster::write_mask_png(rect_mask(48, 48, 8, 8, 40, 40), dir / "masks" / "target" / "000.png");
  raster::write_mask_png(rect_mask(48, 48, 30, 30, 44, 44), dir / "masks" / "target" / "001.png");

  enhance::FileEnhancer fe(dir / "target.png");
  enhance::DirectorySegmenter seg(dir / "masks");
  const raster::RenderConfig rc{2, 1.0, {1, 1, 1}, 48, 1, 16};
  const auto a = enhance::enhance_template(doc, rc, fe, &seg);
  const auto b = enhance::enhance_template(doc, rc, fe, &seg);
  CHECK(svg::serialize(a.doc) == svg::serialize(b.doc));
  REQUIRE(a.new_masks.size() == 1);
  REQUIRE(a.doc.paths.size() == 2);
  CHECK(a.doc.paths[1].semantic_label == "detail (auto)");
  CHECK(a.target == target);
  // Mostly red: the mask is 196 px, 100 of them outside the rect.
  CHECK(a.doc.paths[1].fill.r > 0.8);

  const auto none = enhance::enhance_template(doc, rc, fe, nullptr);
  CHECK(none.doc == doc);
  CHECK_THROWS_AS(enhance::load_mask_dir(dir / "missing", enhance::MaskSource::Target), IoError);
}
