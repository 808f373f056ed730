#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "svgsmith/svg.hpp"
#include "xml.hpp"

namespace svgsmith::svg {
namespace {

// Standard 4-arc circle constant: 4/3 * (sqrt(2) - 1).
constexpr double kKappa = 0.55228474983079339840;

constexpr std::array<std::string_view, 7> kTagNames = {"rect",     "circle",  "ellipse", "line",
                                                       "polyline", "polygon", "path"};

struct NamedColor {
  std::string_view name;
  unsigned rgb;
};
constexpr NamedColor kNamedColors[] = {
    {"black", 0x000000},  {"white", 0xFFFFFF},  {"red", 0xFF0000},    {"green", 0x008000},
    {"lime", 0x00FF00},   {"blue", 0x0000FF},   {"yellow", 0xFFFF00}, {"orange", 0xFFA500},
    {"pink", 0xFFC0CB},   {"brown", 0xA52A2A},  {"gray", 0x808080},   {"grey", 0x808080},
    {"purple", 0x800080}, {"cyan", 0x00FFFF},   {"magenta", 0xFF00FF}, {"gold", 0xFFD700},
    {"navy", 0x000080},   {"silver", 0xC0C0C0}, {"beige", 0xF5F5DC},  {"tan", 0xD2B48C},
    {"lightblue", 0xADD8E6}, {"darkgreen", 0x006400}, {"skyblue", 0x87CEEB},
    {"lightgray", 0xD3D3D3}, {"lightgrey", 0xD3D3D3}, {"darkgray", 0xA9A9A9},
};

enum class ColorKind { Hex, Named, None, Unknown };

struct ParsedColor {
  ColorKind kind = ColorKind::Unknown;
  Rgba rgba;
};

Rgba from_rgb24(unsigned rgb) {
  return {((rgb >> 16) & 0xFF) / 255.0, ((rgb >> 8) & 0xFF) / 255.0, (rgb & 0xFF) / 255.0, 1.0};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

ParsedColor parse_color(std::string_view raw) {
  const std::string s = lower(trim(raw));
  if (s == "none" || s == "transparent") return {ColorKind::None, Rgba{0, 0, 0, 0}};
  if (!s.empty() && s[0] == '#') {
    const std::string hex = s.substr(1);
    if ((hex.size() == 3 || hex.size() == 6) &&
        std::all_of(hex.begin(), hex.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
      unsigned v = static_cast<unsigned>(std::stoul(hex, nullptr, 16));
      if (hex.size() == 3) {
        const unsigned r = (v >> 8) & 0xF, g = (v >> 4) & 0xF, b = v & 0xF;
        v = (r * 17) << 16 | (g * 17) << 8 | (b * 17);
      }
      return {ColorKind::Hex, from_rgb24(v)};
    }
    return {};
  }
  for (const auto& nc : kNamedColors)
    if (nc.name == s) return {ColorKind::Named, from_rgb24(nc.rgb)};
  return {};
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::string buf(text);
  for (auto& c : buf)
    if (c == ',') c = ' ';
  std::istringstream in(buf);
  in.imbue(std::locale::classic());
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ParseError("malformed number list '" + std::string(text) + "'", 1, 1);
  return out;
}

double parse_length(std::string_view text) {
  std::string s = trim(text);
  if (s.ends_with("px")) s.resize(s.size() - 2);
  const auto values = parse_number_list(s);
  if (values.size() != 1) throw ParseError("malformed length '" + std::string(text) + "'", 1, 1);
  return values[0];
}

// Style lookup: `style="a:b;..."` declarations override presentation attributes.
std::optional<std::string> style_value(const Primitive& el, std::string_view name) {
  if (auto style = el.attr("style")) {
    std::string_view rest = *style;
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const auto decl = rest.substr(0, semi);
      const auto colon = decl.find(':');
      if (colon != std::string_view::npos && trim(decl.substr(0, colon)) == name)
        return trim(decl.substr(colon + 1));
      if (semi == std::string_view::npos) break;
      rest = rest.substr(semi + 1);
    }
  }
  return el.attr(name);
}

struct StyleResult {
  Rgba fill{0, 0, 0, 1};
  Stroke stroke;
  std::vector<Issue> errors;
  std::vector<Issue> warnings;
};

StyleResult read_style(const Primitive& el) {
  StyleResult st;
  auto color = [&](std::string_view name, Rgba fallback) {
    const auto v = style_value(el, name);
    if (!v) return fallback;
    const auto c = parse_color(*v);
    switch (c.kind) {
      case ColorKind::Unknown:
        st.errors.push_back({el.id, "UNKNOWN_COLOR",
                             "unrecognized " + std::string(name) + " color '" + *v + "'"});
        return fallback;
      case ColorKind::Named:
        st.errors.push_back({el.id, "NON_HEX_COLOR",
                             std::string(name) + " color '" + *v + "' is not hexadecimal"});
        return c.rgba;
      default:
        return c.rgba;
    }
  };
  st.fill = color("fill", Rgba{0, 0, 0, 1});
  st.stroke.color = color("stroke", Rgba{0, 0, 0, 0});
  const bool stroke_none = st.stroke.color == Rgba{0, 0, 0, 0};
  if (!stroke_none) st.stroke.width = 1.0;
  if (auto w = style_value(el, "stroke-width")) st.stroke.width = std::max(0.0, parse_length(*w));
  // stroke="none" is carried as width 0.
  if (stroke_none) st.stroke.width = 0.0;
  double opacity = 1.0;
  if (auto o = style_value(el, "opacity")) opacity = std::clamp(parse_length(*o), 0.0, 1.0);
  if (auto o = style_value(el, "fill-opacity"))
    st.fill.a *= std::clamp(parse_length(*o), 0.0, 1.0);
  if (auto o = style_value(el, "stroke-opacity"))
    st.stroke.color.a *= std::clamp(parse_length(*o), 0.0, 1.0);
  st.fill.a *= opacity;
  st.stroke.color.a *= opacity;
  return st;
}

std::string sanitize_comment(std::string_view label) {
  std::string out(label);
  std::size_t at;
  while ((at = out.find("--")) != std::string::npos) out.replace(at, 2, "- ");
  return out;
}

void emit_label(std::ostringstream& out, const std::string& label, const std::string*& previous) {
  if (previous != nullptr && *previous == label) return;
  if (previous == nullptr && label.empty()) {
    previous = &label;
    return;
  }
  out << "  <!-- " << sanitize_comment(label) << " -->\n";
  previous = &label;
}

std::string svg_open(const Canvas& canvas) {
  return "<svg viewBox=\"0 0 " + format_number(canvas.width) + ' ' + format_number(canvas.height) +
         "\" xmlns=\"http://www.w3.org/2000/svg\">\n";
}

bool allowed_tag(std::string_view name) { return tag_from_name(name).has_value(); }

std::size_t id_number(std::string_view id) {
  if (!id.starts_with("path_") || id.size() == 5) return 0;
  std::size_t n = 0;
  for (char c : id.substr(5)) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return 0;
    n = n * 10 + static_cast<std::size_t>(c - '0');
  }
  return n;
}

}  // namespace

bool Command::operator==(const Command& o) const {
  if (kind != o.kind) return false;
  if (kind == CommandKind::Move) return pts[0] == o.pts[0];
  return pts == o.pts;
}

std::vector<Vec2> Path::control_points() const {
  std::vector<Vec2> out;
  out.reserve(commands.size() * 3);
  for (const auto& c : commands)
    for (int k = 0; k < c.point_count(); ++k) out.push_back(c.pts[k]);
  return out;
}

void Path::set_control_points(std::span<const Vec2> points) {
  std::size_t i = 0;
  for (auto& c : commands)
    for (int k = 0; k < c.point_count(); ++k) {
      if (i >= points.size()) throw ArgumentError("too few control points for path " + id);
      c.pts[k] = points[i++];
    }
  if (i != points.size()) throw ArgumentError("too many control points for path " + id);
}

std::size_t Path::cubic_count() const {
  return static_cast<std::size_t>(std::count_if(commands.begin(), commands.end(), [](const Command& c) {
    return c.kind == CommandKind::Cubic;
  }));
}

const Path* Document::find(std::string_view id) const {
  for (const auto& p : paths)
    if (p.id == id) return &p;
  return nullptr;
}

std::string_view tag_name(PrimitiveTag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

std::optional<PrimitiveTag> tag_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i)
    if (kTagNames[i] == name) return static_cast<PrimitiveTag>(i);
  return std::nullopt;
}

std::optional<std::string> Primitive::attr(std::string_view name) const {
  for (const auto& [k, v] : attributes)
    if (k == name) return v;
  return std::nullopt;
}

double Primitive::number(std::string_view name, double fallback) const {
  const auto v = attr(name);
  return v ? parse_length(*v) : fallback;
}

bool ValidationReport::has_error(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(), [&](const Issue& i) { return i.code == code; });
}

std::string ValidationReport::summary() const {
  std::string out;
  auto add = [&](const char* level, const Issue& i) {
    out += std::string(level) + " " + i.code;
    if (!i.path_id.empty()) out += " [" + i.path_id + "]";
    out += ": " + i.message + "\n";
  };
  for (const auto& e : errors) add("error", e);
  for (const auto& w : warnings) add("warning", w);
  return out;
}

ValidationError::ValidationError(ValidationReport report)
    : Error("VALIDATION", "template validation failed:\n" + report.summary()),
      report_(std::move(report)) {}

std::string path_id(std::size_t one_based_index) { return "path_" + std::to_string(one_based_index); }

Path primitive_to_cubics(const Primitive& el) {
  Path path;
  path.id = el.id;
  path.semantic_label = el.semantic_label;
  auto& cmds = path.commands;

  auto polyline = [&](const std::vector<double>& xy, bool close) {
    if (xy.size() % 2 != 0) throw ParseError("odd coordinate count in points of " + el.id, el.line, 1);
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i + 1 < xy.size(); i += 2) pts.push_back({xy[i], xy[i + 1]});
    if (pts.size() < 2) throw DegenerateShapeError(std::string(tag_name(el.tag)) + " " + el.id + " needs at least 2 points");
    cmds.push_back(Command::move(pts[0]));
    for (std::size_t i = 1; i < pts.size(); ++i) cmds.push_back(Command::line(pts[i - 1], pts[i]));
    if (close && !(pts.back() == pts.front())) cmds.push_back(Command::line(pts.back(), pts.front()));
    path.closed = close;
  };

  auto ellipse = [&](double cx, double cy, double rx, double ry) {
    if (!(rx > 0.0) || !(ry > 0.0))
      throw DegenerateShapeError(std::string(tag_name(el.tag)) + " " + el.id + " has a non-positive radius");
    const double kx = kKappa * rx, ky = kKappa * ry;
    cmds.push_back(Command::move({cx + rx, cy}));
    cmds.push_back(Command::cubic({cx + rx, cy + ky}, {cx + kx, cy + ry}, {cx, cy + ry}));
    cmds.push_back(Command::cubic({cx - kx, cy + ry}, {cx - rx, cy + ky}, {cx - rx, cy}));
    cmds.push_back(Command::cubic({cx - rx, cy - ky}, {cx - kx, cy - ry}, {cx, cy - ry}));
    cmds.push_back(Command::cubic({cx + kx, cy - ry}, {cx + rx, cy - ky}, {cx + rx, cy}));
    path.closed = true;
  };

  switch (el.tag) {
    case PrimitiveTag::Rect: {
      const double x = el.number("x", 0), y = el.number("y", 0);
      const double w = el.number("width", 0), h = el.number("height", 0);
      if (!(w > 0.0) || !(h > 0.0)) throw DegenerateShapeError("rect " + el.id + " has a non-positive size");
      double rx = el.number("rx", -1), ry = el.number("ry", -1);
      if (rx < 0 && ry >= 0) rx = ry;
      if (ry < 0 && rx >= 0) ry = rx;
      rx = std::clamp(rx, 0.0, w / 2);
      ry = std::clamp(ry, 0.0, h / 2);
      path.closed = true;
      if (rx <= 0.0 || ry <= 0.0) {
        const Vec2 c[4] = {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
        cmds.push_back(Command::move(c[0]));
        for (int i = 0; i < 4; ++i) cmds.push_back(Command::line(c[i], c[(i + 1) % 4]));
        break;
      }
      const double kx = kKappa * rx, ky = kKappa * ry;
      Vec2 cur{x + rx, y};
      cmds.push_back(Command::move(cur));
      auto line_to = [&](Vec2 p) {
        if (!(p == cur)) cmds.push_back(Command::line(cur, p));
        cur = p;
      };
      auto corner = [&](Vec2 c1, Vec2 c2, Vec2 p) {
        cmds.push_back(Command::cubic(c1, c2, p));
        cur = p;
      };
      line_to({x + w - rx, y});
      corner({x + w - rx + kx, y}, {x + w, y + ry - ky}, {x + w, y + ry});
      line_to({x + w, y + h - ry});
      corner({x + w, y + h - ry + ky}, {x + w - rx + kx, y + h}, {x + w - rx, y + h});
      line_to({x + rx, y + h});
      corner({x + rx - kx, y + h}, {x, y + h - ry + ky}, {x, y + h - ry});
      line_to({x, y + ry});
      corner({x, y + ry - ky}, {x + rx - kx, y}, {x + rx, y});
      break;
    }
    case PrimitiveTag::Circle: {
      const double r = el.number("r", 0);
      ellipse(el.number("cx", 0), el.number("cy", 0), r, r);
      break;
    }
    case PrimitiveTag::Ellipse:
      ellipse(el.number("cx", 0), el.number("cy", 0), el.number("rx", 0), el.number("ry", 0));
      break;
    case PrimitiveTag::Line: {
      const Vec2 a{el.number("x1", 0), el.number("y1", 0)};
      const Vec2 b{el.number("x2", 0), el.number("y2", 0)};
      if (a == b) throw DegenerateShapeError("line " + el.id + " has zero length");
      cmds.push_back(Command::move(a));
      cmds.push_back(Command::line(a, b));
      break;
    }
    case PrimitiveTag::Polyline:
      polyline(parse_number_list(el.attr("points").value_or("")), false);
      break;
    case PrimitiveTag::Polygon:
      polyline(parse_number_list(el.attr("points").value_or("")), true);
      break;
    case PrimitiveTag::Path: {
      const auto pd = parse_path_data(el.attr("d").value_or(""));
      if (pd.commands.empty()) throw DegenerateShapeError("path " + el.id + " has no commands");
      cmds = pd.commands;
      path.closed = pd.closed;
      break;
    }
  }

  const StyleResult st = read_style(el);
  path.fill = st.fill;
  path.stroke = st.stroke;
  if (auto t = el.attr("transform")) path.transform = parse_transform(*t);
  return path;
}

ParsedSvg parse_svg(std::string_view text, ParseOptions options) {
  const xml::Node root = xml::parse(text);
  if (root.name != "svg") throw ParseError("root element must be <svg>, found <" + root.name + ">", root.line, root.column);

  ParsedSvg out;
  for (const auto& [k, v] : root.attributes) {
    if (k == "viewBox") {
      const auto nums = parse_number_list(v);
      if (nums.size() != 4) throw ParseError("viewBox must have 4 numbers", root.line, root.column);
      out.view_box = ViewBox{nums[0], nums[1], nums[2], nums[3]};
    }
  }
  if (out.view_box) {
    out.doc.canvas = {out.view_box->width, out.view_box->height};
  } else {
    for (const auto& [k, v] : root.attributes) {
      if (k == "width") out.doc.canvas.width = parse_length(v);
      if (k == "height") out.doc.canvas.height = parse_length(v);
    }
  }

  auto& issues = out.parse_issues;
  std::string current_label;
  bool have_label = false;
  for (const auto& child : root.children) {
    if (child.kind == xml::Node::Kind::Comment) {
      current_label = trim(child.name);
      have_label = true;
      continue;
    }
    if (!allowed_tag(child.name)) {
      Issue issue{"", "DISALLOWED_ELEMENT", "element <" + child.name + "> is not allowed (line " + std::to_string(child.line) + ")"};
      for (const auto& [k, v] : child.attributes)
        if (k == "id") issue.path_id = v;
      if (options.strict) throw ValidationError(ValidationReport{{issue}, {}});
      issues.errors.push_back(std::move(issue));
      continue;
    }
    for (const auto& grand : child.children)
      if (grand.kind == xml::Node::Kind::Element) {
        Issue issue{"", "DISALLOWED_ELEMENT", "nested element <" + grand.name + "> is not allowed"};
        if (options.strict) throw ValidationError(ValidationReport{{issue}, {}});
        issues.errors.push_back(std::move(issue));
      }

    Primitive el;
    el.tag = *tag_from_name(child.name);
    el.line = child.line;
    for (const auto& [k, v] : child.attributes) {
      if (k == "id") el.id = v;
      else el.attributes.emplace_back(k, v);
    }
    el.semantic_label = current_label;
    el.has_label = have_label;
    if (!have_label)
      issues.warnings.push_back({el.id, "MISSING_LABEL", "no comment describes this element"});

    Path path;
    try {
      path = primitive_to_cubics(el);
    } catch (const DegenerateShapeError& e) {
      if (options.strict) throw;
      issues.errors.push_back({el.id, "DEGENERATE_SHAPE", e.what()});
      path.id = el.id;
      path.semantic_label = el.semantic_label;
    }
    const StyleResult st = read_style(el);
    for (const auto& e : st.errors) {
      if (options.strict && e.code == "UNKNOWN_COLOR") throw ValidationError(ValidationReport{{e}, {}});
      issues.errors.push_back(e);
    }
    out.elements.push_back(std::move(el));
    out.doc.paths.push_back(std::move(path));
  }
  return out;
}

std::string color_to_hex(const Rgba& color) {
  auto byte = [](double v) { return static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", byte(color.r), byte(color.g), byte(color.b));
  return buf;
}

std::string serialize(const Document& doc) {
  std::ostringstream out;
  out << svg_open(doc.canvas);
  const std::string* previous = nullptr;
  for (const auto& p : doc.paths) {
    emit_label(out, p.semantic_label, previous);
    out << "  <path id=\"" << xml::escape_attribute(p.id) << "\" d=\"" << path_data(p) << '"';
    if (p.fill == Rgba{0, 0, 0, 0}) {
      out << " fill=\"none\"";
    } else {
      out << " fill=\"" << color_to_hex(p.fill) << '"';
      if (p.fill.a != 1.0) out << " fill-opacity=\"" << format_number(p.fill.a) << '"';
    }
    if (p.stroke.width == 0.0 && p.stroke.color == Rgba{0, 0, 0, 0}) {
      out << " stroke=\"none\"";
    } else {
      out << " stroke=\"" << color_to_hex(p.stroke.color) << "\" stroke-width=\""
          << format_number(p.stroke.width) << '"';
      if (p.stroke.color.a != 1.0) out << " stroke-opacity=\"" << format_number(p.stroke.color.a) << '"';
    }
    if (!p.transform.is_identity()) {
      const auto m = p.transform.entries();
      out << " transform=\"matrix(";
      for (std::size_t i = 0; i < 6; ++i) out << (i ? " " : "") << format_number(m[i]);
      out << ")\"";
    }
    out << "/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string serialize_template(const ParsedSvg& parsed) {
  Canvas canvas = parsed.doc.canvas;
  std::ostringstream out;
  if (parsed.view_box && (parsed.view_box->x != 0 || parsed.view_box->y != 0)) {
    const auto& vb = *parsed.view_box;
    out << "<svg viewBox=\"" << format_number(vb.x) << ' ' << format_number(vb.y) << ' '
        << format_number(vb.width) << ' ' << format_number(vb.height)
        << "\" xmlns=\"http://www.w3.org/2000/svg\">\n";
  } else {
    out << svg_open(canvas);
  }
  const std::string* previous = nullptr;
  for (const auto& el : parsed.elements) {
    emit_label(out, el.semantic_label, previous);
    out << "  <" << tag_name(el.tag) << " id=\"" << xml::escape_attribute(el.id) << '"';
    for (const auto& [k, v] : el.attributes) out << ' ' << k << "=\"" << xml::escape_attribute(v) << '"';
    out << "/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

ValidationReport validate_template(const ParsedSvg& parsed) {
  ValidationReport report = parsed.parse_issues;
  auto error = [&](const std::string& id, const char* code, std::string message) {
    report.errors.push_back({id, code, std::move(message)});
  };

  if (!parsed.view_box || !(*parsed.view_box == ViewBox{0, 0, 512, 512}))
    error("", "BAD_VIEWBOX", "the viewBox must be \"0 0 512 512\"");

  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < parsed.elements.size(); ++i) {
    const auto& el = parsed.elements[i];
    if (el.id.empty()) {
      error("", "MISSING_ID", std::string(tag_name(el.tag)) + " on line " + std::to_string(el.line) + " has no id");
      continue;
    }
    if (++seen[el.id] == 2) error(el.id, "DUPLICATE_ID", "id " + el.id + " is used more than once");
    if (id_number(el.id) == 0) {
      error(el.id, "BAD_ID", "id " + el.id + " does not have the form path_<n>");
    } else if (el.id != path_id(i + 1)) {
      error(el.id, "NON_SEQUENTIAL_ID", "expected id " + path_id(i + 1) + " at position " + std::to_string(i + 1));
    }
    if (el.tag == PrimitiveTag::Path) {
      try {
        const auto pd = parse_path_data(el.attr("d").value_or(""));
        if (pd.raw_command_count > 5)
          error(el.id, "PATH_TOO_LONG", "path has " + std::to_string(pd.raw_command_count) + " commands (at most 5 allowed)");
        const bool filled = parsed.doc.paths[i].fill.a > 0.0;
        if (filled && !pd.ends_with_close)
          error(el.id, "PATH_NOT_CLOSED", "a filled path must end with Z");
      } catch (const ParseError& e) {
        error(el.id, "BAD_PATH_DATA", e.what());
      }
    }
  }
  return report;
}

namespace {
template <typename Item>
std::map<std::string, std::string> renumber(std::vector<Item>& items) {
  std::map<std::string, std::string> renamed;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string fresh = path_id(i + 1);
    if (items[i].id != fresh) {
      if (!items[i].id.empty()) renamed.emplace(items[i].id, fresh);
      items[i].id = fresh;
    }
  }
  return renamed;
}
}  // namespace

RenumberResult renumber_ids(Document doc) {
  auto renamed = renumber(doc.paths);
  return {std::move(doc), std::move(renamed)};
}

TemplateRenumberResult renumber_ids(ParsedSvg parsed) {
  auto renamed = renumber(parsed.elements);
  renumber(parsed.doc.paths);
  return {std::move(parsed), std::move(renamed)};
}

Path bake_transform(Path path) {
  if (path.transform.is_identity()) return path;
  for (auto& c : path.commands)
    for (int k = 0; k < c.point_count(); ++k) c.pts[k] = path.transform.apply(c.pts[k]);
  // Stroke width follows the transform's area scale, as a renderer would draw it.
  const Affine& m = path.transform;
  path.stroke.width *= std::sqrt(std::abs(m.a * m.d - m.b * m.c));
  path.transform = Affine::identity();
  return path;
}

}  // namespace svgsmith::svg
