#include <charconv>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "svgsmith/svg.hpp"

namespace svgsmith::svg {
namespace {

class Scanner {
 public:
  explicit Scanner(std::string_view s) : s_(s) {}

  void skip_separators() {
    while (i_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[i_])) || s_[i_] == ','))
      ++i_;
  }
  bool done() {
    skip_separators();
    return i_ >= s_.size();
  }
  char peek() {
    skip_separators();
    return i_ < s_.size() ? s_[i_] : '\0';
  }
  char take() { return s_[i_++]; }
  bool at_number() {
    const char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
  }

  double number() {
    skip_separators();
    // from_chars rejects a leading '+', so skip it manually.
    std::size_t start = i_;
    if (start < s_.size() && s_[start] == '+') ++start;
    double value = 0.0;
    const auto* first = s_.data() + start;
    const auto* last = s_.data() + s_.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first)
      throw ParseError("expected a number in path data near '" + std::string(s_.substr(i_, 12)) +
                           "'",
                       1, static_cast<int>(i_) + 1);
    i_ = static_cast<std::size_t>(ptr - s_.data());
    return value;
  }

  // Arc flags may be written without separators ("a1 1 0 01 5 5").
  bool flag() {
    skip_separators();
    if (i_ < s_.size() && (s_[i_] == '0' || s_[i_] == '1')) return s_[i_++] == '1';
    throw ParseError("expected an arc flag", 1, static_cast<int>(i_) + 1);
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

void append_arc(std::vector<Command>& out, Vec2 p0, double rx, double ry, double phi_deg,
                bool large_arc, bool sweep, Vec2 p1) {
  if (p0 == p1) return;
  rx = std::abs(rx);
  ry = std::abs(ry);
  if (rx == 0.0 || ry == 0.0) {
    out.push_back(Command::line(p0, p1));
    return;
  }
  const double phi = phi_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(phi), sn = std::sin(phi);
  const Vec2 half = (p0 - p1) * 0.5;
  const Vec2 pr{cs * half.x + sn * half.y, -sn * half.x + cs * half.y};
  const double lambda = (pr.x * pr.x) / (rx * rx) + (pr.y * pr.y) / (ry * ry);
  if (lambda > 1.0) {
    rx *= std::sqrt(lambda);
    ry *= std::sqrt(lambda);
  }
  const double num = rx * rx * ry * ry - rx * rx * pr.y * pr.y - ry * ry * pr.x * pr.x;
  const double den = rx * rx * pr.y * pr.y + ry * ry * pr.x * pr.x;
  double coef = den > 0.0 ? std::sqrt(std::max(0.0, num / den)) : 0.0;
  if (large_arc == sweep) coef = -coef;
  const Vec2 cpr{coef * rx * pr.y / ry, -coef * ry * pr.x / rx};
  const Vec2 mid = (p0 + p1) * 0.5;
  const Vec2 center{cs * cpr.x - sn * cpr.y + mid.x, sn * cpr.x + cs * cpr.y + mid.y};

  auto angle = [](Vec2 u, Vec2 v) { return std::atan2(cross(u, v), dot(u, v)); };
  const Vec2 u{(pr.x - cpr.x) / rx, (pr.y - cpr.y) / ry};
  const Vec2 v{(-pr.x - cpr.x) / rx, (-pr.y - cpr.y) / ry};
  const double theta1 = angle({1, 0}, u);
  double delta = angle(u, v);
  if (!sweep && delta > 0) delta -= 2 * std::numbers::pi;
  if (sweep && delta < 0) delta += 2 * std::numbers::pi;

  const int segments = std::max(1, static_cast<int>(std::ceil(std::abs(delta) / (std::numbers::pi / 2) - 1e-9)));
  const double step = delta / segments;
  const double k = 4.0 / 3.0 * std::tan(step / 4.0);
  auto point_at = [&](double t) {
    const Vec2 e{rx * std::cos(t), ry * std::sin(t)};
    return Vec2{cs * e.x - sn * e.y + center.x, sn * e.x + cs * e.y + center.y};
  };
  auto tangent_at = [&](double t) {
    const Vec2 e{-rx * std::sin(t), ry * std::cos(t)};
    return Vec2{cs * e.x - sn * e.y, sn * e.x + cs * e.y};
  };
  Vec2 start = p0;
  for (int s = 0; s < segments; ++s) {
    const double t0 = theta1 + step * s;
    const double t1 = t0 + step;
    const Vec2 end = (s == segments - 1) ? p1 : point_at(t1);
    out.push_back(Command::cubic(start + tangent_at(t0) * k, end - tangent_at(t1) * k, end));
    start = end;
  }
}

}  // namespace

PathData parse_path_data(std::string_view d) {
  PathData result;
  Scanner sc(d);
  Vec2 current{}, subpath_start{};
  Vec2 last_cubic_ctrl{}, last_quad_ctrl{};
  char prev_cmd = 0;
  char cmd = 0;
  bool have_move = false;
  bool need_move = false;  // after Z, a non-M command restarts at the subpath start

  auto ensure_move = [&] {
    if (!have_move) throw ParseError("path data must begin with a moveto", 1, 1);
    if (need_move) {
      result.commands.push_back(Command::move(subpath_start));
      need_move = false;
    }
  };

  while (!sc.done()) {
    const char c = sc.peek();
    if (std::isalpha(static_cast<unsigned char>(c)) && c != 'e' && c != 'E') {
      cmd = sc.take();
    } else if (cmd == 0) {
      throw ParseError("path data must begin with a command", 1, 1);
    } else if (cmd == 'M') {
      cmd = 'L';
    } else if (cmd == 'm') {
      cmd = 'l';
    } else if (cmd == 'Z' || cmd == 'z') {
      throw ParseError("unexpected number after closepath", 1, 1);
    }
    const bool rel = std::islower(static_cast<unsigned char>(cmd));
    const Vec2 base = rel ? current : Vec2{};
    ++result.raw_command_count;
    result.ends_with_close = false;
    switch (std::toupper(static_cast<unsigned char>(cmd))) {
      case 'M': {
        const double x = sc.number(), y = sc.number();
        current = base + Vec2{x, y};
        subpath_start = current;
        result.commands.push_back(Command::move(current));
        have_move = true;
        need_move = false;
        break;
      }
      case 'L': {
        ensure_move();
        const double x = sc.number(), y = sc.number();
        const Vec2 p = base + Vec2{x, y};
        result.commands.push_back(Command::line(current, p));
        current = p;
        break;
      }
      case 'H': {
        ensure_move();
        const double x = sc.number();
        const Vec2 p{rel ? current.x + x : x, current.y};
        result.commands.push_back(Command::line(current, p));
        current = p;
        break;
      }
      case 'V': {
        ensure_move();
        const double y = sc.number();
        const Vec2 p{current.x, rel ? current.y + y : y};
        result.commands.push_back(Command::line(current, p));
        current = p;
        break;
      }
      case 'C': {
        ensure_move();
        Vec2 pts[3];
        for (auto& p : pts) {
          const double x = sc.number(), y = sc.number();
          p = base + Vec2{x, y};
        }
        result.commands.push_back(Command::cubic(pts[0], pts[1], pts[2]));
        last_cubic_ctrl = pts[1];
        current = pts[2];
        break;
      }
      case 'S': {
        ensure_move();
        const char pu = static_cast<char>(std::toupper(static_cast<unsigned char>(prev_cmd)));
        const Vec2 c1 = (pu == 'C' || pu == 'S') ? current * 2.0 - last_cubic_ctrl : current;
        Vec2 pts[2];
        for (auto& p : pts) {
          const double x = sc.number(), y = sc.number();
          p = base + Vec2{x, y};
        }
        result.commands.push_back(Command::cubic(c1, pts[0], pts[1]));
        last_cubic_ctrl = pts[0];
        current = pts[1];
        break;
      }
      case 'Q':
      case 'T': {
        ensure_move();
        Vec2 q;
        const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(cmd)));
        if (up == 'Q') {
          const double x = sc.number(), y = sc.number();
          q = base + Vec2{x, y};
        } else {
          const char pu = static_cast<char>(std::toupper(static_cast<unsigned char>(prev_cmd)));
          q = (pu == 'Q' || pu == 'T') ? current * 2.0 - last_quad_ctrl : current;
        }
        const double x = sc.number(), y = sc.number();
        const Vec2 p = base + Vec2{x, y};
        result.commands.push_back(Command::cubic(current + (q - current) * (2.0 / 3.0),
                                                 p + (q - p) * (2.0 / 3.0), p));
        last_quad_ctrl = q;
        current = p;
        break;
      }
      case 'A': {
        ensure_move();
        const double rx = sc.number(), ry = sc.number(), rot = sc.number();
        const bool large = sc.flag(), sweep = sc.flag();
        const double x = sc.number(), y = sc.number();
        const Vec2 p = base + Vec2{x, y};
        append_arc(result.commands, current, rx, ry, rot, large, sweep, p);
        current = p;
        break;
      }
      case 'Z': {
        if (!have_move) throw ParseError("closepath before moveto", 1, 1);
        if (!(current == subpath_start)) result.commands.push_back(Command::line(current, subpath_start));
        current = subpath_start;
        result.closed = true;
        result.ends_with_close = true;
        need_move = true;
        break;
      }
      default:
        throw ParseError(std::string("unsupported path command '") + cmd + "'", 1, 1);
    }
    prev_cmd = cmd;
  }
  return result;
}

Affine parse_transform(std::string_view text) {
  Affine total;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == ','))
      ++i;
    if (i >= text.size()) break;
    const std::size_t name_start = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    const std::string name(text.substr(name_start, i - name_start));
    const auto open = text.find('(', i);
    const auto close = text.find(')', i);
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
      throw ParseError("malformed transform '" + std::string(text) + "'", 1, static_cast<int>(i) + 1);
    Scanner sc(text.substr(open + 1, close - open - 1));
    std::vector<double> args;
    while (!sc.done()) args.push_back(sc.number());
    i = close + 1;

    auto need = [&](std::size_t lo, std::size_t hi) {
      if (args.size() < lo || args.size() > hi)
        throw ParseError("wrong argument count for transform " + name, 1, static_cast<int>(name_start) + 1);
    };
    Affine t;
    if (name == "matrix") {
      need(6, 6);
      t = {args[0], args[1], args[2], args[3], args[4], args[5]};
    } else if (name == "translate") {
      need(1, 2);
      t = Affine::translate(args[0], args.size() > 1 ? args[1] : 0.0);
    } else if (name == "scale") {
      need(1, 2);
      t = Affine::scale(args[0], args.size() > 1 ? args[1] : args[0]);
    } else if (name == "rotate") {
      if (args.size() != 1 && args.size() != 3)
        throw ParseError("wrong argument count for transform rotate", 1, static_cast<int>(name_start) + 1);
      t = Affine::rotate(args[0]);
      if (args.size() == 3)
        t = Affine::translate(args[1], args[2]) * t * Affine::translate(-args[1], -args[2]);
    } else {
      throw ParseError("unsupported transform '" + name + "'", 1, static_cast<int>(name_start) + 1);
    }
    total = total * t;
  }
  return total;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string path_data(const Path& path) {
  std::string out;
  bool first = true;
  for (const auto& cmd : path.commands) {
    if (cmd.kind == CommandKind::Move) {
      if (!first && path.closed) out += " Z";
      if (!first) out += ' ';
      out += "M " + format_number(cmd.pts[0].x) + ' ' + format_number(cmd.pts[0].y);
    } else {
      out += " C";
      for (const auto& p : cmd.pts) out += ' ' + format_number(p.x) + ' ' + format_number(p.y);
    }
    first = false;
  }
  if (path.closed && !path.commands.empty()) out += " Z";
  return out;
}

}  // namespace svgsmith::svg
