#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svgsmith/error.hpp"
#include "svgsmith/geometry.hpp"

namespace svgsmith::svg {

enum class CommandKind { Move, Cubic };

/// One path command. A Move uses `pts[0]`; a Cubic uses all three
/// (two off-curve controls followed by the endpoint).
struct Command {
  CommandKind kind = CommandKind::Move;
  std::array<Vec2, 3> pts{};

  static Command move(Vec2 p) { return {CommandKind::Move, {p, Vec2{}, Vec2{}}}; }
  static Command cubic(Vec2 c1, Vec2 c2, Vec2 end) { return {CommandKind::Cubic, {c1, c2, end}}; }
  /// Cubic whose controls sit at the 1/3 and 2/3 points of the chord.
  static Command line(Vec2 from, Vec2 to) {
    return cubic(lerp(from, to, 1.0 / 3.0), lerp(from, to, 2.0 / 3.0), to);
  }

  int point_count() const { return kind == CommandKind::Move ? 1 : 3; }
  Vec2 end_point() const { return kind == CommandKind::Move ? pts[0] : pts[2]; }
  bool operator==(const Command& o) const;
};

struct Stroke {
  Rgba color{0, 0, 0, 0};
  double width = 0.0;
  bool operator==(const Stroke&) const = default;
};

struct Path {
  std::string id;
  std::vector<Command> commands;
  Rgba fill{0, 0, 0, 1};
  Stroke stroke;
  Affine transform;
  bool closed = false;
  std::string semantic_label;

  /// Control points flattened in command order (Move: 1, Cubic: 3 each).
  std::vector<Vec2> control_points() const;
  void set_control_points(std::span<const Vec2> points);
  std::size_t cubic_count() const;
  bool operator==(const Path&) const = default;
};

struct Canvas {
  double width = 512.0;
  double height = 512.0;
  bool operator==(const Canvas&) const = default;
};

struct Document {
  std::vector<Path> paths;
  Canvas canvas;

  const Path* find(std::string_view id) const;
  bool operator==(const Document&) const = default;
};

enum class PrimitiveTag { Rect, Circle, Ellipse, Line, Polyline, Polygon, Path };

std::string_view tag_name(PrimitiveTag tag);
std::optional<PrimitiveTag> tag_from_name(std::string_view name);

/// A raw template element exactly as the script spelled it. Attributes keep
/// their source order so the template can be re-emitted faithfully.
struct Primitive {
  PrimitiveTag tag = PrimitiveTag::Path;
  std::string id;
  std::vector<std::pair<std::string, std::string>> attributes;  // excludes id
  std::string semantic_label;
  bool has_label = false;
  int line = 0;

  std::optional<std::string> attr(std::string_view name) const;
  double number(std::string_view name, double fallback) const;
  bool operator==(const Primitive& o) const {
    return tag == o.tag && id == o.id && attributes == o.attributes &&
           semantic_label == o.semantic_label;
  }
};

struct ViewBox {
  double x = 0, y = 0, width = 0, height = 0;
  bool operator==(const ViewBox&) const = default;
};

struct Issue {
  std::string path_id;
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  bool ok() const { return errors.empty(); }
  bool has_error(std::string_view code) const;
  /// One issue per line, suitable for feeding back to the LLM.
  std::string summary() const;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

/// Result of parsing an SVG script: the cubic-normalized document plus the
/// raw primitives, index-aligned (`doc.paths[i]` came from `elements[i]`).
struct ParsedSvg {
  Document doc;
  std::vector<Primitive> elements;
  std::optional<ViewBox> view_box;
  /// Problems found while reading (disallowed tags, colors, degenerate shapes,
  /// missing labels). validate_template folds these into its report.
  ValidationReport parse_issues;
};

struct ParseOptions {
  /// Throw on disallowed elements, unknown colors and degenerate shapes
  /// instead of recording them in `parse_issues`.
  bool strict = true;
};

ParsedSvg parse_svg(std::string_view text, ParseOptions options = {});

/// Converts one raw element to Move + Cubic commands with style and transform.
Path primitive_to_cubics(const Primitive& element);

/// Serializes cubic paths as `<path>` elements. Colors are written as hex.
std::string serialize(const Document& doc);
/// Re-emits the raw primitives (template form) with their current ids.
std::string serialize_template(const ParsedSvg& parsed);

ValidationReport validate_template(const ParsedSvg& parsed);

struct RenumberResult {
  Document doc;
  /// old id -> new id for every id that changed.
  std::map<std::string, std::string> renamed;
};
RenumberResult renumber_ids(Document doc);

struct TemplateRenumberResult {
  ParsedSvg parsed;
  std::map<std::string, std::string> renamed;
};
TemplateRenumberResult renumber_ids(ParsedSvg parsed);

std::string path_id(std::size_t one_based_index);

/// Applies each path's transform to its control points and resets it to identity.
Path bake_transform(Path path);

// Helpers shared by the parser and the serializer.
std::string format_number(double value);
std::string color_to_hex(const Rgba& color);
std::string path_data(const Path& path);
/// Parses `d` attribute text into absolute Move/Cubic commands.
struct PathData {
  std::vector<Command> commands;
  bool closed = false;
  int raw_command_count = 0;
  bool ends_with_close = false;
};
PathData parse_path_data(std::string_view d);
Affine parse_transform(std::string_view text);

}  // namespace svgsmith::svg
