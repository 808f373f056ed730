#include <doctest.h>

#include <cmath>
#include <random>

#include "svgsmith/svg.hpp"
#include "test_support.hpp"

using namespace svgsmith;
using namespace svgsmith::svg;

namespace {

Primitive make(PrimitiveTag tag, std::vector<std::pair<std::string, std::string>> attrs) {
  Primitive p;
  p.tag = tag;
  p.id = "path_1";
  p.attributes = std::move(attrs);
  return p;
}

// Distance from `p` to the polyline through `pts`.
double distance_to_polyline(Vec2 p, const std::vector<Vec2>& pts) {
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 ab = pts[i + 1] - pts[i];
    const double u = std::clamp(dot(p - pts[i], ab) / norm2(ab), 0.0, 1.0);
    best = std::min(best, norm(p - (pts[i] + ab * u)));
  }
  return best;
}

}  // namespace

TEST_CASE("parse_svg reads the unicorn exemplar") {
  const auto parsed = parse_svg(test::read_text("unicorn.svg"));
  REQUIRE(parsed.elements.size() == 14);
  REQUIRE(parsed.doc.paths.size() == 14);
  for (std::size_t i = 0; i < 14; ++i) CHECK(parsed.doc.paths[i].id == path_id(i + 1));
  CHECK(parsed.elements[0].tag == PrimitiveTag::Ellipse);
  CHECK(parsed.doc.paths[0].semantic_label == "Body");
  // The nearest preceding comment labels every element of a group.
  CHECK(parsed.doc.paths[3].semantic_label == "Legs");
  CHECK(parsed.doc.paths[9].semantic_label == "Horn");
  CHECK(parsed.view_box == ViewBox{0, 0, 512, 512});
  CHECK(parsed.doc.canvas == Canvas{512, 512});
  CHECK(parsed.doc.paths[8].closed == false);
  CHECK(parsed.doc.paths[8].stroke.width == 8.0);
  CHECK(parsed.doc.paths[10].commands.size() == 2);
}

TEST_CASE("parse_svg edge cases") {
  SUBCASE("empty document") {
    const auto parsed = parse_svg(R"(<svg viewBox="0 0 512 512"/>)");
    CHECK(parsed.doc.paths.empty());
  }
  SUBCASE("disallowed element is named") {
    try {
      parse_svg(R"(<svg viewBox="0 0 512 512"><text id="path_1">hi</text></svg>)");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      REQUIRE(e.report().errors.size() == 1);
      CHECK(e.report().errors[0].code == "DISALLOWED_ELEMENT");
      CHECK(std::string(e.what()).find("text") != std::string::npos);
    }
  }
  SUBCASE("malformed xml reports position") {
    try {
      parse_svg("<svg viewBox=\"0 0 512 512\">\n  <rect id=\"path_1\" x=\"1\"\n</svg>");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() >= 2);
      CHECK(e.column() >= 1);
    }
  }
  SUBCASE("mismatched tags") {
    CHECK_THROWS_AS(parse_svg("<svg><rect></circle></svg>"), ParseError);
  }
  SUBCASE("wrong root") { CHECK_THROWS_AS(parse_svg("<html/>"), ParseError); }
  SUBCASE("style attribute and named colors") {
    const auto parsed = parse_svg(
        R"(<svg viewBox="0 0 512 512"><rect id="path_1" width="4" height="4" style="fill: red; stroke: #00f; stroke-width: 3"/></svg>)",
        {.strict = false});
    const auto& p = parsed.doc.paths[0];
    CHECK(p.fill == Rgba{1, 0, 0, 1});
    CHECK(p.stroke.color == Rgba{0, 0, 1, 1});
    CHECK(p.stroke.width == 3.0);
    CHECK(parsed.parse_issues.has_error("NON_HEX_COLOR"));
  }
  SUBCASE("unknown color is an error") {
    CHECK_THROWS_AS(parse_svg(R"(<svg><rect id="path_1" width="4" height="4" fill="blurple"/></svg>)"),
                    ValidationError);
  }
  SUBCASE("stroke none means width zero") {
    const auto parsed =
        parse_svg(R"(<svg><rect id="path_1" width="4" height="4" stroke="none" stroke-width="5"/></svg>)");
    CHECK(parsed.doc.paths[0].stroke.width == 0.0);
  }
}

TEST_CASE("primitive_to_cubics") {
  SUBCASE("rect elevates edges exactly") {
    const auto path = primitive_to_cubics(
        make(PrimitiveTag::Rect, {{"x", "0"}, {"y", "0"}, {"width", "30"}, {"height", "10"}}));
    REQUIRE(path.commands.size() == 5);
    CHECK(path.closed);
    CHECK(path.commands[0].kind == CommandKind::Move);
    CHECK(path.commands[0].pts[0] == Vec2{0, 0});
    const auto& top = path.commands[1];
    CHECK(top.pts[0].x == doctest::Approx(10.0));
    CHECK(top.pts[1].x == doctest::Approx(20.0));
    CHECK(top.pts[2] == Vec2{30, 0});
    CHECK(path.commands[4].pts[2] == Vec2{0, 0});
  }
  SUBCASE("circle radial error below 0.0003 r") {
    const double r = 100.0;
    const Vec2 center{256, 256};
    const auto path = primitive_to_cubics(make(PrimitiveTag::Circle, {{"cx", "256"}, {"cy", "256"}, {"r", "100"}}));
    REQUIRE(path.cubic_count() == 4);
    CHECK(path.closed);
    double worst = 0.0;
    Vec2 start = path.commands[0].pts[0];
    for (std::size_t c = 1; c < path.commands.size(); ++c) {
      const auto& cmd = path.commands[c];
      for (int s = 0; s < 2500; ++s) {
        const double t = s / 2499.0;
        const Vec2 p = bezier::eval(start, cmd.pts[0], cmd.pts[1], cmd.pts[2], t);
        worst = std::max(worst, std::abs(norm(p - center) - r));
      }
      start = cmd.pts[2];
    }
    CHECK(worst < 0.0003 * r);
    CHECK(worst > 0.0);
  }
  SUBCASE("polyline stays open") {
    const auto path = primitive_to_cubics(make(PrimitiveTag::Polyline, {{"points", "0,0 10,0 10,10"}}));
    CHECK(path.commands.size() == 3);
    CHECK_FALSE(path.closed);
  }
  SUBCASE("polygon repeats its first point only once") {
    const auto path = primitive_to_cubics(make(PrimitiveTag::Polygon, {{"points", "369 180 348 200 356 172 369 180"}}));
    CHECK(path.commands.size() == 4);
    CHECK(path.closed);
  }
  SUBCASE("degenerate shapes") {
    CHECK_THROWS_AS(primitive_to_cubics(make(PrimitiveTag::Circle, {{"r", "0"}})), DegenerateShapeError);
    CHECK_THROWS_AS(primitive_to_cubics(make(PrimitiveTag::Polygon, {{"points", "1 2"}})), DegenerateShapeError);
    CHECK_THROWS_AS(primitive_to_cubics(make(PrimitiveTag::Ellipse, {{"rx", "3"}, {"ry", "-1"}})),
                    DegenerateShapeError);
  }
  SUBCASE("transform composes") {
    const auto path = primitive_to_cubics(make(
        PrimitiveTag::Rect, {{"width", "1"}, {"height", "1"}, {"transform", "translate(10 5) scale(2)"}}));
    CHECK(path.transform.apply({1, 1}) == Vec2{12, 7});
    const auto rot = parse_transform("rotate(90 10 10)");
    const Vec2 q = rot.apply({20, 10});
    CHECK(q.x == doctest::Approx(10.0));
    CHECK(q.y == doctest::Approx(20.0));
  }
}

TEST_CASE("straight-line elevation is exact at any parameter") {
  const std::vector<std::pair<PrimitiveTag, std::vector<std::pair<std::string, std::string>>>> cases = {
      {PrimitiveTag::Rect, {{"x", "3.5"}, {"y", "-2"}, {"width", "41.25"}, {"height", "17"}}},
      {PrimitiveTag::Line, {{"x1", "1"}, {"y1", "2"}, {"x2", "300.5"}, {"y2", "-7"}}},
      {PrimitiveTag::Polyline, {{"points", "0,0 13,7 100,-3 55.5,80"}}},
      {PrimitiveTag::Polygon, {{"points", "10 10 90 30 60 95 5 70"}}},
  };
  for (const auto& [tag, attrs] : cases) {
    const auto path = primitive_to_cubics(make(tag, attrs));
    Vec2 start = path.commands[0].pts[0];
    for (std::size_t c = 1; c < path.commands.size(); ++c) {
      const auto& cmd = path.commands[c];
      const std::vector<Vec2> chord = {start, cmd.pts[2]};
      for (int s = 0; s <= 200; ++s) {
        const Vec2 p = bezier::eval(start, cmd.pts[0], cmd.pts[1], cmd.pts[2], s / 200.0);
        CHECK(distance_to_polyline(p, chord) < 1e-9);
        // Uniform parameterization: the point sits at fraction t of the chord.
        CHECK(norm(p - lerp(start, cmd.pts[2], s / 200.0)) < 1e-9);
      }
      start = cmd.pts[2];
    }
  }
}

TEST_CASE("path data normalization") {
  SUBCASE("relative and shorthand commands") {
    const auto pd = parse_path_data("m10 10 h 5 v5 l-5 0 z");
    CHECK(pd.closed);
    CHECK(pd.raw_command_count == 5);
    REQUIRE(pd.commands.size() == 5);
    CHECK(pd.commands[1].pts[2] == Vec2{15, 10});
    CHECK(pd.commands[2].pts[2] == Vec2{15, 15});
    CHECK(pd.commands[4].pts[2] == Vec2{10, 10});
  }
  SUBCASE("quadratic elevation") {
    const auto pd = parse_path_data("M 337 178 Q 342 183 347 178");
    REQUIRE(pd.commands.size() == 2);
    const auto& c = pd.commands[1];
    // The cubic passes through the quadratic's midpoint (342, 180.5).
    const Vec2 mid = bezier::eval({337, 178}, c.pts[0], c.pts[1], c.pts[2], 0.5);
    CHECK(mid.x == doctest::Approx(342.0));
    CHECK(mid.y == doctest::Approx(180.5));
    CHECK_FALSE(pd.ends_with_close);
  }
  SUBCASE("smooth commands reflect controls") {
    const auto pd = parse_path_data("M0 0 C 0 10 10 10 10 0 S 20 -10 20 0 T 30 0");
    REQUIRE(pd.commands.size() == 4);
    CHECK(pd.commands[2].pts[0] == Vec2{10, -10});
  }
  SUBCASE("arc becomes cubics on the circle") {
    const auto pd = parse_path_data("M 0 0 A 10 10 0 0 1 20 0");
    REQUIRE(pd.commands.size() >= 3);
    Vec2 start{0, 0};
    for (std::size_t i = 1; i < pd.commands.size(); ++i) {
      const auto& c = pd.commands[i];
      for (int s = 0; s <= 50; ++s) {
        const Vec2 p = bezier::eval(start, c.pts[0], c.pts[1], c.pts[2], s / 50.0);
        CHECK(std::abs(norm(p - Vec2{10, 0}) - 10.0) < 0.01);
      }
      start = c.pts[2];
    }
    CHECK(pd.commands.back().pts[2] == Vec2{20, 0});
  }
  SUBCASE("compact arc flags and exponents") {
    const auto pd = parse_path_data("M0,0a5,5 0 01 10,0L1e1-5");
    CHECK(pd.commands.back().pts[2] == Vec2{10, -5});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_path_data("L 1 2"), ParseError);
    CHECK_THROWS_AS(parse_path_data("M 1"), ParseError);
  }
}

TEST_CASE("serialize") {
  Document doc;
  Path p;
  p.id = "path_1";
  p.commands = {Command::move({1, 2}), Command::cubic({3, 4}, {5, 6}, {7, 8})};
  p.fill = Rgba{1, 0, 0, 1};
  doc.paths.push_back(p);
  const std::string text = serialize(doc);
  CHECK(text.find("fill=\"#FF0000\"") != std::string::npos);
  CHECK(text.find("d=\"M 1 2 C 3 4 5 6 7 8\"") != std::string::npos);
  CHECK(text.find("viewBox=\"0 0 512 512\"") != std::string::npos);

  SUBCASE("unicorn round trip keeps command lists") {
    const auto first = parse_svg(test::read_text("unicorn.svg"));
    const auto second = parse_svg(serialize(first.doc));
    REQUIRE(second.doc.paths.size() == first.doc.paths.size());
    for (std::size_t i = 0; i < first.doc.paths.size(); ++i) {
      CHECK(second.doc.paths[i].commands == first.doc.paths[i].commands);
      CHECK(second.doc.paths[i] == first.doc.paths[i]);
    }
    CHECK(second.doc == first.doc);
  }
}

TEST_CASE("round trip property on random documents") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-50.0, 560.0);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> count(1, 6);
  const char* labels[] = {"", "body", "left -- wing", "tail"};
  for (int trial = 0; trial < 200; ++trial) {
    Document doc;
    doc.canvas = {512, 512};
    const int paths = count(rng);
    for (int i = 0; i < paths; ++i) {
      Path p;
      p.id = path_id(static_cast<std::size_t>(i + 1));
      const Vec2 start{coord(rng), coord(rng)};
      p.commands.push_back(Command::move(start));
      const int n = count(rng);
      for (int k = 0; k < n; ++k) p.commands.push_back(Command::cubic({coord(rng), coord(rng)}, {coord(rng), coord(rng)}, {coord(rng), coord(rng)}));
      p.closed = trial % 2 == 0;
      if (p.closed) p.commands.back().pts[2] = start;
      p.fill = trial % 5 == 0 ? Rgba{0, 0, 0, 0} : Rgba{byte(rng) / 255.0, byte(rng) / 255.0, byte(rng) / 255.0, trial % 3 == 0 ? 0.25 : 1.0};
      if (trial % 4 != 0) p.stroke = {Rgba{byte(rng) / 255.0, 0, 1, 1}, coord(rng) / 100.0 + 1.0};
      if (trial % 7 == 0) p.transform = Affine{1.5, 0.25, -0.125, 2, coord(rng), coord(rng)};
      p.semantic_label = labels[(trial + i) % 4];
      if (p.semantic_label == "left -- wing") p.semantic_label = "left - wing";
      doc.paths.push_back(p);
    }
    const auto reparsed = parse_svg(serialize(doc));
    REQUIRE(reparsed.doc == doc);
  }
}

TEST_CASE("validate_template") {
  const std::string unicorn = test::read_text("unicorn.svg");
  const auto report = validate_template(parse_svg(unicorn));
  CHECK(report.errors.empty());
  CHECK(report.warnings.empty());

  auto inject = [&](const std::string& from, const std::string& to) {
    std::string text = unicorn;
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    return validate_template(parse_svg(text, {.strict = false}));
  };
  auto only = [](const ValidationReport& r, const char* code) {
    CHECK(r.has_error(code));
    for (const auto& e : r.errors) CHECK(e.code == std::string(code));
  };
  SUBCASE("disallowed element") {
    only(inject("<!-- Eye -->", "<text id=\"x\">A</text>"), "DISALLOWED_ELEMENT");
  }
  SUBCASE("viewBox") { only(inject("0 0 512 512", "0 0 256 256"), "BAD_VIEWBOX"); }
  SUBCASE("duplicate id") {
    const auto r = inject("id=\"path_3\"", "id=\"path_2\"");
    CHECK(r.has_error("DUPLICATE_ID"));
  }
  SUBCASE("non-hex color") { only(inject("fill=\"#ffff00\"", "fill=\"yellow\""), "NON_HEX_COLOR"); }
  SUBCASE("raw path too long") {
    only(inject("d=\"M 337 178 Q 342 183 347 178\"", "d=\"M 337 178 L 1 1 L 2 2 L 3 3 L 4 4 L 5 5 L 6 6\""),
         "PATH_TOO_LONG");
  }
  SUBCASE("filled raw path without Z") {
    only(inject("d=\"M 337 178 Q 342 183 347 178\" fill=\"none\"", "d=\"M 337 178 Q 342 183 347 178\" fill=\"#000000\""),
         "PATH_NOT_CLOSED");
  }
  SUBCASE("ids out of sequence") { only(inject("id=\"path_14\"", "id=\"path_15\""), "NON_SEQUENTIAL_ID"); }
  SUBCASE("missing comment is a warning") {
    const auto r = validate_template(parse_svg(R"(<svg viewBox="0 0 512 512"><circle id="path_1" r="3"/></svg>)"));
    CHECK(r.errors.empty());
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].code == "MISSING_LABEL");
  }
}

TEST_CASE("renumber_ids") {
  Document doc;
  for (const char* id : {"path_1", "path_2", "path_4", "path_5"}) {
    Path p;
    p.id = id;
    doc.paths.push_back(p);
  }
  const auto result = renumber_ids(doc);
  for (std::size_t i = 0; i < 4; ++i) CHECK(result.doc.paths[i].id == path_id(i + 1));
  CHECK(result.renamed == std::map<std::string, std::string>{{"path_4", "path_3"}, {"path_5", "path_4"}});

  const auto again = renumber_ids(result.doc);
  CHECK(again.renamed.empty());
  CHECK(again.doc == result.doc);

  CHECK(renumber_ids(Document{}).renamed.empty());

  const auto templ = renumber_ids(parse_svg(R"(<svg viewBox="0 0 512 512"><!-- a --><circle id="path_7" r="3"/></svg>)"));
  CHECK(templ.parsed.elements[0].id == "path_1");
  CHECK(templ.parsed.doc.paths[0].id == "path_1");
  CHECK(serialize_template(templ.parsed).find("<circle id=\"path_1\" r=\"3\"/>") != std::string::npos);
}

TEST_CASE("serialize_template reproduces the unicorn elements") {
  const auto parsed = parse_svg(test::read_text("unicorn.svg"));
  const auto again = parse_svg(serialize_template(parsed));
  CHECK(again.elements == parsed.elements);
  CHECK(again.doc == parsed.doc);
}
