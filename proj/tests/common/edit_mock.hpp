#pragma once

// A scripted editor: each call rewrites the SVG block of the latest request
// line by line, the way a model echoes unchanged elements verbatim.

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "svgsmith/llm.hpp"

namespace svgsmith::testing {

using LineEdit = std::function<std::vector<std::string>(std::vector<std::string>)>;

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

inline std::string request_script(const llm::Conversation& convo) {
  for (auto it = convo.rbegin(); it != convo.rend(); ++it)
    if (it->role == "user" && it->text.find("```svg\n") != std::string::npos) return llm::extract_svg_block(it->text);
  return {};
}

inline std::string edit_reply(const llm::Conversation& convo, const LineEdit& edit, const std::string& summary) {
  std::string out = "Here is the edited SVG.\n\n```svg\n";
  for (const auto& line : edit(split_lines(request_script(convo)))) out += line + "\n";
  return out + "```\n\nOperation Summary:\n" + summary + "\n";
}

inline LineEdit drop_id(const std::string& id) {
  return [id](std::vector<std::string> lines) {
    std::vector<std::string> out;
    for (auto& l : lines)
      if (l.find("id=\"" + id + "\"") == std::string::npos) out.push_back(l);
    return out;
  };
}

/// Replaces the element carrying `id` with `element`.
inline LineEdit replace_id(const std::string& id, const std::string& element) {
  return [id, element](std::vector<std::string> lines) {
    for (auto& l : lines)
      if (l.find("id=\"" + id + "\"") != std::string::npos) l = "  " + element;
    return lines;
  };
}

/// Inserts `element` after the element carrying `after` (or first when empty).
inline LineEdit insert_after(const std::string& after, const std::string& element) {
  return [after, element](std::vector<std::string> lines) {
    std::vector<std::string> out;
    bool done = false;
    for (auto& l : lines) {
      if (!done && after.empty() && l.find("<path") != std::string::npos) {
        out.push_back("  " + element);
        done = true;
      }
      out.push_back(l);
      if (!done && !after.empty() && l.find("id=\"" + after + "\"") != std::string::npos) {
        out.push_back("  " + element);
        done = true;
      }
    }
    return out;
  };
}

inline LineEdit identity_edit() {
  return [](std::vector<std::string> lines) { return lines; };
}

}  // namespace svgsmith::testing
