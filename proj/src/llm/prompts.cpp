#include <algorithm>
#include <cctype>

#include "svgsmith/error.hpp"
#include "svgsmith/llm.hpp"

namespace svgsmith::llm {

namespace catalog {
extern const std::string_view system;
extern const std::string_view expansion;
extern const std::string_view script_generation;
extern const std::string_view rectification;
extern const std::string_view editing;
}  // namespace catalog

std::string_view prompt_text(PromptId id) {
  switch (id) {
    case PromptId::System: return catalog::system;
    case PromptId::Expansion: return catalog::expansion;
    case PromptId::ScriptGeneration: return catalog::script_generation;
    case PromptId::Rectification: return catalog::rectification;
    case PromptId::Editing: return catalog::editing;
  }
  throw ArgumentError("unknown prompt id");
}

std::string_view prompt_name(PromptId id) {
  switch (id) {
    case PromptId::System: return "system";
    case PromptId::Expansion: return "expansion";
    case PromptId::ScriptGeneration: return "script_generation";
    case PromptId::Rectification: return "rectification";
    case PromptId::Editing: return "editing";
  }
  throw ArgumentError("unknown prompt id");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Heading text with markdown decoration and list enumerators removed, lowercased.
std::string heading_key(std::string_view line) {
  std::string s;
  for (char c : line)
    if (c != '*' && c != '#' && c != '_') s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t i = 0;
  auto skip_space = [&] {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '-')) ++i;
  };
  skip_space();
  std::size_t j = i;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  if (j > i && j < s.size() && (s[j] == '.' || s[j] == ')')) i = j + 1;
  skip_space();
  return s.substr(i);
}

enum Section { kNone = -1, kScene, kObjects, kComponents, kLayout };

Section match_heading(const std::string& key) {
  static const std::pair<std::string_view, Section> markers[] = {
      {"scene description", kScene},         {"object detail", kObjects},
      {"component breakdown", kComponents},  {"key components layout", kLayout},
      {"key component layout", kLayout},     {"scene layout", kLayout},
      {"layout", kLayout},
  };
  for (const auto& [m, sec] : markers)
    if (key.rfind(m, 0) == 0) return sec;
  return kNone;
}

}  // namespace

ExpandedPrompt parse_expansion(std::string_view reply) {
  std::string sections[4];
  bool seen[4] = {false, false, false, false};
  Section cur = kNone;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    const auto nl = reply.find('\n', pos);
    const std::string_view line = reply.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? reply.size() + 1 : nl + 1;

    const Section sec = match_heading(heading_key(line));
    if (sec != kNone && !seen[sec]) {
      cur = sec;
      seen[sec] = true;
      const auto colon = line.find(':');
      if (colon != std::string_view::npos) sections[cur] += trim(line.substr(colon + 1));
      continue;
    }
    if (cur == kNone) continue;
    if (!sections[cur].empty()) sections[cur] += '\n';
    sections[cur] += std::string(line);
  }
  static const char* names[] = {"scene description", "object details", "component breakdown", "layout"};
  ExpandedPrompt out;
  for (int k = 0; k < 4; ++k) {
    sections[k] = trim(sections[k]);
    if (sections[k].empty())
      throw FormatError(std::string("expansion reply has no ") + names[k] + " section", std::string(reply));
  }
  out.scene_description = sections[kScene];
  out.object_details = sections[kObjects];
  out.component_breakdown = sections[kComponents];
  out.layout_plan = sections[kLayout];
  out.raw = std::string(reply);
  return out;
}

std::string extract_svg_block(std::string_view reply) {
  const auto open = reply.find("```svg");
  if (open == std::string_view::npos) throw FormatError("reply has no ```svg block", std::string(reply));
  const auto body = reply.find('\n', open);
  if (body == std::string_view::npos) throw FormatError("```svg block is empty", std::string(reply));
  const auto close = reply.find("```", body + 1);
  if (close == std::string_view::npos) throw FormatError("```svg block is not closed", std::string(reply));
  return trim(reply.substr(body + 1, close - body - 1));
}

Conversation new_conversation() { return {{"system", std::string(prompt_text(PromptId::System)), {}}}; }

}  // namespace svgsmith::llm
