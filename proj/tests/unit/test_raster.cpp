#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "../common/scenes.hpp"
#include "svgsmith/raster.hpp"

using namespace svgsmith;
using raster::RasterImage;
using raster::RenderConfig;

namespace {

svg::Path rect(const std::string& id, double x, double y, double w, double h, Rgba fill) {
  svg::Path p;
  p.id = id;
  p.closed = true;
  p.fill = fill;
  const Vec2 a{x, y}, b{x + w, y}, c{x + w, y + h}, d{x, y + h};
  p.commands = {svg::Command::move(a), svg::Command::line(a, b), svg::Command::line(b, c), svg::Command::line(c, d),
                svg::Command::line(d, a)};
  return p;
}

svg::Document doc_of(std::vector<svg::Path> paths, double size) {
  svg::Document d;
  d.canvas = {size, size};
  d.paths = std::move(paths);
  return d;
}

}  // namespace

TEST_CASE("full-canvas black rect renders interior black") {
  const auto doc = doc_of({rect("path_1", 0, 0, 32, 32, {0, 0, 0, 1})}, 32);
  const RasterImage img = raster::render(doc);
  CHECK(img.width == 32);
  for (int y = 1; y < 31; ++y)
    for (int x = 1; x < 31; ++x)
      for (int c = 0; c < 3; ++c) CHECK(img.at(x, y, c) == 0.0);
}

TEST_CASE("later paths paint over earlier ones") {
  const auto doc = doc_of({rect("path_1", 4, 4, 20, 20, {1, 0, 0, 1}), rect("path_2", 12, 12, 16, 16, {0, 0, 1, 1})}, 32);
  const RasterImage img = raster::render(doc);
  CHECK(img.at(18, 18, 0) == 0.0);
  CHECK(img.at(18, 18, 2) == 1.0);
  CHECK(img.at(6, 6, 0) == 1.0);
  CHECK(img.at(6, 6, 2) == 0.0);
}

TEST_CASE("swapping opaque overlapping paths changes only the overlap") {
  const auto a = rect("path_1", 4, 4, 20, 20, {1, 0, 0, 1});
  const auto b = rect("path_2", 12, 12, 16, 16, {0, 0, 1, 1});
  const RasterImage ab = raster::render(doc_of({a, b}, 32));
  const RasterImage ba = raster::render(doc_of({b, a}, 32));
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool in_a = x >= 4 && x < 24 && y >= 4 && y < 24;
      const bool in_b = x >= 12 && x < 28 && y >= 12 && y < 28;
      // Pixels whose 1-pixel neighbourhood avoids both edges are unambiguous.
      const bool near_edge = x == 3 || x == 4 || x == 23 || x == 24 || x == 11 || x == 12 || x == 27 || x == 28 ||
                             y == 3 || y == 4 || y == 23 || y == 24 || y == 11 || y == 12 || y == 27 || y == 28;
      if (near_edge) continue;
      const bool same = ab.at(x, y, 0) == ba.at(x, y, 0) && ab.at(x, y, 2) == ba.at(x, y, 2);
      CHECK(same == !(in_a && in_b));
    }
}

TEST_CASE("stroke-only path draws its outline and leaves the interior") {
  svg::Path p = rect("path_1", 8, 8, 48, 48, {0, 0, 0, 0});
  p.stroke = {{0, 0, 0, 1}, 0.8};
  const RasterImage img = raster::render(doc_of({p}, 64));
  CHECK(img.at(32, 32, 0) == 1.0);
  CHECK(img.at(0, 0, 0) == 1.0);
  double darkest = 1.0;
  for (int y = 20; y < 40; ++y) darkest = std::min(darkest, img.at(8, y, 0));
  CHECK(darkest < 0.8);
}

TEST_CASE("nonzero winding fills self-overlapping loops") {
  // Same square traced twice in the same direction: winding 2, still filled.
  svg::Path p = rect("path_1", 8, 8, 16, 16, {0, 0, 0, 1});
  const auto extra = rect("x", 8, 8, 16, 16, {0, 0, 0, 1});
  p.commands.insert(p.commands.end(), extra.commands.begin(), extra.commands.end());
  const RasterImage img = raster::render(doc_of({p}, 32));
  CHECK(img.at(16, 16, 0) == 0.0);
}

TEST_CASE("integer translation shifts the image") {
  std::mt19937_64 rng(7);
  svg::Document doc = testing::random_scene(rng, 64);
  for (auto& p : doc.paths) p.stroke.width = std::max(p.stroke.width, 0.0);
  svg::Document moved = doc;
  for (auto& p : moved.paths) p.transform = Affine::translate(3, 2) * p.transform;
  RenderConfig cfg;
  const RasterImage a = raster::render(doc, cfg);
  const RasterImage b = raster::render(moved, cfg);
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 56; ++x)
      for (int c = 0; c < 3; ++c) CHECK(b.at(x + 3, y + 2, c) == doctest::Approx(a.at(x, y, c)).epsilon(1e-9));
}

TEST_CASE("rendering is bit-identical across runs and thread counts") {
  std::mt19937_64 rng(11);
  const svg::Document doc = testing::random_scene(rng, 64);
  const RasterImage target = raster::render(testing::random_scene(rng, 64));
  RenderConfig one;
  one.threads = 1;
  RenderConfig four = one;
  four.threads = 4;
  const auto loss = [&](const RasterImage& img) { return testing::mse_against(target, img); };
  const auto r1 = raster::render_with_grad(doc, one, loss);
  const auto r2 = raster::render_with_grad(doc, one, loss);
  const auto r4 = raster::render_with_grad(doc, four, loss);
  CHECK(r1.image == r2.image);
  CHECK(r1.image == r4.image);
  for (std::size_t i = 0; i < doc.paths.size(); ++i) {
    CHECK(r1.grads.paths[i].points == r4.grads.paths[i].points);
    CHECK(r1.grads.paths[i].transform == r4.grads.paths[i].transform);
    CHECK(r1.grads.paths[i].fill_rgb == r4.grads.paths[i].fill_rgb);
    CHECK(r1.grads.paths[i].stroke_width == r4.grads.paths[i].stroke_width);
  }
}

TEST_CASE("gradients match central finite differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    const svg::Document doc = testing::random_scene(rng, 64);
    const RasterImage target = raster::render(testing::random_scene(rng, 64));
    const auto r = testing::check_gradients(doc, target, RenderConfig{});
    CAPTURE(trial);
    CAPTURE(r.worst);
    CHECK(r.checked > 50);
    CHECK(r.passed >= 0.95 * r.checked);
  }
}

TEST_CASE("gradient descent direction and zero gradient at the optimum") {
  const auto target_doc = doc_of({rect("path_1", 22, 20, 16, 16, {0, 0, 0, 1})}, 64);
  const RasterImage target = raster::render(target_doc);
  const auto loss = [&](const RasterImage& img) { return testing::mse_against(target, img); };

  const auto at_opt = raster::render_with_grad(target_doc, RenderConfig{}, loss);
  CHECK(at_opt.loss == 0.0);
  for (const auto& g : at_opt.grads.paths[0].points) {
    CHECK(std::abs(g.x) < 1e-8);
    CHECK(std::abs(g.y) < 1e-8);
  }

  const auto shifted = doc_of({rect("path_1", 20, 20, 16, 16, {0, 0, 0, 1})}, 64);
  const auto r = raster::render_with_grad(shifted, RenderConfig{}, loss);
  CHECK(r.loss > 0.0);
  CHECK(r.loss == loss(raster::render(shifted)).value);
  // Positive x-translation reduces the offset, so the loss slope along e is negative.
  CHECK(r.grads.paths[0].transform[4] < 0.0);
}

TEST_CASE("non-finite coordinates name the offending path") {
  auto doc = doc_of({rect("path_1", 0, 0, 10, 10, {0, 0, 0, 1}), rect("path_2", 0, 0, 10, 10, {0, 0, 0, 1})}, 32);
  doc.paths[1].commands[2].pts[1].x = std::nan("");
  try {
    raster::render(doc);
    FAIL("expected RenderError");
  } catch (const RenderError& e) {
    CHECK(e.path_id() == "path_2");
  }
}

TEST_CASE("render config is validated") {
  RenderConfig cfg;
  cfg.supersampling = 3;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg.supersampling = 4;
  cfg.smoothing_width = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg.smoothing_width = 2.5;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg.smoothing_width = 2.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("resolution scales the output") {
  const auto doc = doc_of({rect("path_1", 0, 0, 256, 256, {0, 0, 0, 1})}, 512);
  RenderConfig cfg;
  cfg.resolution = 64;
  const RasterImage img = raster::render(doc, cfg);
  CHECK(img.width == 64);
  CHECK(img.at(10, 10, 0) == 0.0);
  CHECK(img.at(40, 40, 0) == 1.0);
}

TEST_CASE("path masks") {
  const svg::Canvas canvas{512, 512};
  CHECK(raster::render_path_mask(rect("path_1", 0, 0, 10, 10, {0, 0, 0, 1}), canvas).count() == 100);

  auto parsed = svg::parse_svg(R"(<svg viewBox="0 0 512 512"><circle id="path_1" cx="256" cy="256" r="50" fill="#000000"/></svg>)");
  const double area = 3.141592653589793 * 2500;
  const auto n = static_cast<double>(raster::render_path_mask(parsed.doc.paths[0], canvas).count());
  CHECK(std::abs(n - area) < 0.01 * area);

  svg::Path line;
  line.id = "path_1";
  line.closed = false;
  line.commands = {svg::Command::move({10, 10}), svg::Command::line({10, 10}, {100, 100})};
  CHECK(raster::render_path_mask(line, canvas).count() == 0);
  line.stroke = {{0, 0, 0, 1}, 4};
  CHECK(raster::render_path_mask(line, canvas).count() > 300);
}

TEST_CASE("mask coverage seeds feed geometric gradients") {
  const auto doc = doc_of({rect("path_1", 10.3, 10.6, 20, 20, {0, 0, 0, 1})}, 64);
  raster::DiffRenderer r(RenderConfig{});
  auto total_coverage = [&](const svg::Document& d) {
    auto f = r.forward(d);
    double total = 0;
    for (double v : r.mask_coverage(*f, 0)) total += v;
    return total;
  };
  CHECK(total_coverage(doc) == doctest::Approx(400).epsilon(1e-2));

  auto frame = r.forward(doc);
  const std::size_t npx = 64 * 64;
  std::vector<std::vector<double>> seeds{std::vector<double>(npx, 1.0)};
  const auto g = r.backward(*frame, std::vector<double>(npx * 3, 0.0), seeds);
  // Oracle: central differences of the summed coverage.
  const double h = 1e-4;
  for (std::size_t k = 0; k < 6; ++k) {
    const testing::ParamRef ref{0, testing::ParamRef::Transform, k};
    const double fd = (total_coverage(testing::perturbed(doc, ref, h)) -
                       total_coverage(testing::perturbed(doc, ref, -h))) / (2 * h);
    CAPTURE(k);
    CHECK(g.paths[0].transform[k] == doctest::Approx(fd).epsilon(1e-3).scale(1.0));
  }
}

TEST_CASE("png round trip") {
  std::mt19937_64 rng(3);
  RasterImage img(7, 5);
  for (auto& v : img.rgb) v = testing::uniform(rng, 0, 1);
  const RasterImage q = raster::quantize(img);
  CHECK(raster::decode_png(raster::encode_png(img)) == q);
  const auto dir = std::filesystem::temp_directory_path() / "svgsmith_png_test";
  std::filesystem::create_directories(dir);
  raster::write_png(img, dir / "a.png");
  CHECK(raster::read_png(dir / "a.png") == q);

  raster::BinaryMask m(9, 4);
  m.set(2, 1);
  m.set(8, 3);
  raster::write_mask_png(m, dir / "m.png");
  CHECK(raster::read_mask_png(dir / "m.png") == m);
  CHECK_THROWS_AS(raster::decode_png(std::vector<std::uint8_t>{1, 2, 3}), IoError);
  std::filesystem::remove_all(dir);
}
