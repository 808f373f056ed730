#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace svgsmith::svg::xml {

// Minimal XML reader for the SVG subset: elements, attributes, comments.
// Text content and processing instructions are skipped.
struct Node {
  enum class Kind { Element, Comment };
  Kind kind = Kind::Element;
  std::string name;  // element name, or comment text
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Node> children;
  int line = 0;
  int column = 0;
};

/// Parses a document with exactly one root element. Throws ParseError.
Node parse(std::string_view text);

std::string escape_attribute(std::string_view value);

}  // namespace svgsmith::svg::xml
