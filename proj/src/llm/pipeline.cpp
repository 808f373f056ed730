#include <algorithm>
#include <future>
#include <json.hpp>
#include <numeric>

#include "svgsmith/error.hpp"
#include "svgsmith/llm.hpp"

namespace svgsmith::llm {
namespace {

std::string fill_prompt(std::string_view text, std::string_view user_prompt) {
  std::string out(text);
  const auto at = out.find(kTextPlaceholder);
  if (at != std::string::npos) out.replace(at, kTextPlaceholder.size(), user_prompt);
  return out;
}

bool trim_empty(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::vector<std::uint8_t> png_of(const raster::RasterImage& img) { return raster::encode_png(img); }

// Either a parsed, validated template or the reason it was rejected.
struct Attempt {
  std::optional<svg::ParsedSvg> parsed;
  std::string problem;  // text for the corrective re-ask
  std::string raw;
  std::optional<svg::ValidationReport> report;
};

Attempt try_template(const std::string& reply, bool renumber) {
  Attempt a;
  a.raw = reply;
  std::string code;
  try {
    code = extract_svg_block(reply);
  } catch (const FormatError&) {
    a.problem = "Your reply did not contain the SVG code in a ```svg fenced block. Reply with the complete SVG code in "
                "that format.";
    return a;
  }
  svg::ParsedSvg parsed;
  try {
    parsed = svg::parse_svg(code, {.strict = false});
  } catch (const Error& e) {
    a.problem = std::string("The SVG code could not be parsed: ") + e.what() +
                ". Reply with the complete corrected SVG code in a ```svg block.";
    return a;
  }
  if (renumber) parsed = svg::renumber_ids(std::move(parsed)).parsed;
  svg::ValidationReport report = svg::validate_template(parsed);
  if (!report.ok()) {
    a.problem = "The SVG code breaks these rules:\n" + report.summary() +
                "\nFix them and reply with the complete corrected SVG code in a ```svg block.";
    a.report = std::move(report);
    return a;
  }
  a.parsed = std::move(parsed);
  return a;
}

}  // namespace

Pipeline::Pipeline(ChatTransport& transport, PipelineConfig cfg) : transport_(transport), cfg_(std::move(cfg)) {
  cfg_.render.validate();
}

ExpandedPrompt Pipeline::expand_prompt(Conversation& convo, std::string_view prompt) const {
  if (trim_empty(prompt)) throw ArgumentError("prompt is empty");
  convo.push_back({"user", fill_prompt(prompt_text(PromptId::Expansion), prompt), {}});
  std::string reply = transport_.send(convo);
  convo.push_back({"assistant", reply, {}});
  try {
    ExpandedPrompt e = parse_expansion(reply);
    e.prompt = std::string(prompt);
    return e;
  } catch (const FormatError& first) {
    convo.push_back({"user",
                     std::string("Your reply could not be parsed (") + first.what() +
                         "). Reply again with exactly these four headed sections: \"Scene Description:\", "
                         "\"Object Detail:\", \"Component Breakdown:\" and \"Key Components Layout:\".",
                     {}});
    reply = transport_.send(convo);
    convo.push_back({"assistant", reply, {}});
    ExpandedPrompt e = parse_expansion(reply);  // a second failure propagates with this raw reply
    e.prompt = std::string(prompt);
    return e;
  }
}

svg::ParsedSvg Pipeline::request_template(Conversation& convo, Message request, bool renumber) const {
  convo.push_back(std::move(request));
  std::string reply = transport_.send(convo);
  convo.push_back({"assistant", reply, {}});
  Attempt a = try_template(reply, renumber);
  if (a.parsed) return std::move(*a.parsed);

  convo.push_back({"user", a.problem, {}});
  reply = transport_.send(convo);
  convo.push_back({"assistant", reply, {}});
  Attempt b = try_template(reply, renumber);
  if (b.parsed) return std::move(*b.parsed);
  if (b.report) throw svg::ValidationError(*b.report);
  throw FormatError("template reply rejected after one corrective request: " + b.problem, b.raw);
}

svg::ParsedSvg Pipeline::generate_script(Conversation& convo, const ExpandedPrompt&) const {
  return request_template(convo, {"user", std::string(prompt_text(PromptId::ScriptGeneration)), {}}, false);
}

svg::ParsedSvg Pipeline::rectify(Conversation& convo, const svg::ParsedSvg& tpl,
                                 const raster::RasterImage& rendered) const {
  std::string text(prompt_text(PromptId::Rectification));
  text += "\n\nCurrent SVG code:\n```svg\n" + svg::serialize_template(tpl) + "```";
  return request_template(convo, {"user", std::move(text), png_of(rendered)}, true);
}

ExpandedPrompt Pipeline::expand_prompt(std::string_view prompt) const {
  Conversation convo = new_conversation();
  return expand_prompt(convo, prompt);
}

svg::ParsedSvg Pipeline::generate_script(const ExpandedPrompt& expanded) const {
  Conversation convo = new_conversation();
  convo.push_back({"user", fill_prompt(prompt_text(PromptId::Expansion), expanded.prompt), {}});
  convo.push_back({"assistant", expanded.raw, {}});
  return generate_script(convo, expanded);
}

svg::ParsedSvg Pipeline::rectify(const svg::ParsedSvg& tpl, const raster::RasterImage& rendered) const {
  Conversation convo = new_conversation();
  return rectify(convo, tpl, rendered);
}

CandidateSet Pipeline::generate_candidates(std::string_view prompt, int rounds, int repeats) const {
  if (rounds < 0) throw ArgumentError("rectification rounds must be >= 0");
  if (repeats < 1) throw ArgumentError("repeats must be >= 1");
  if (trim_empty(prompt)) throw ArgumentError("prompt is empty");

  struct RepeatResult {
    std::vector<Candidate> candidates;
    std::optional<GenerationFailure> failure;
  };
  const std::string text(prompt);
  auto run_repeat = [this, text, rounds](int repeat) {
    RepeatResult out;
    int round = 0;
    try {
      Conversation convo = new_conversation();
      if (cfg_.on_stage) cfg_.on_stage("expanding", repeat, 0);
      const ExpandedPrompt expanded = expand_prompt(convo, text);
      if (cfg_.on_stage) cfg_.on_stage("scripting", repeat, 0);
      svg::ParsedSvg tpl = generate_script(convo, expanded);
      out.candidates.push_back({tpl, 0, repeat, std::nullopt});
      for (round = 1; round <= rounds; ++round) {
        if (cfg_.on_stage) cfg_.on_stage("rectifying", repeat, round);
        tpl = rectify(convo, tpl, raster::render(tpl.doc, cfg_.render));
        out.candidates.push_back({tpl, round, repeat, std::nullopt});
      }
    } catch (const Error& e) {
      out.failure = GenerationFailure{repeat, round, e.code(), e.what()};
    }
    return out;
  };

  std::vector<RepeatResult> results(repeats);
  if (cfg_.parallel_repeats <= 1) {
    for (int s = 0; s < repeats; ++s) results[s] = run_repeat(s + 1);
  } else {
    for (int base = 0; base < repeats; base += cfg_.parallel_repeats) {
      std::vector<std::future<RepeatResult>> batch;
      for (int s = base; s < std::min(repeats, base + cfg_.parallel_repeats); ++s)
        batch.push_back(std::async(std::launch::async, run_repeat, s + 1));
      for (std::size_t k = 0; k < batch.size(); ++k) results[base + k] = batch[k].get();
    }
  }

  CandidateSet set;
  for (auto& r : results) {
    for (auto& c : r.candidates) set.candidates.push_back(std::move(c));
    if (r.failure) set.failures.push_back(*r.failure);
  }
  if (set.candidates.empty()) {
    const auto& f = set.failures.back();
    throw Error(f.code, "every generation repeat failed; last error: " + f.message);
  }
  return set;
}

HttpScorer::HttpScorer(std::string endpoint, util::HttpPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(policy) {
  if (endpoint_.empty()) throw ConfigError("scorer endpoint is empty");
}

double HttpScorer::score(const raster::RasterImage& image, const svg::Document&) {
  const auto png = raster::encode_png(image);
  const auto res = util::http_post(endpoint_, std::string(png.begin(), png.end()), "image/png", {}, policy_);
  if (res.status < 200 || res.status >= 300)
    throw TransportError("scorer answered HTTP " + std::to_string(res.status));
  try {
    const auto j = nlohmann::json::parse(res.body);
    if (j.is_number()) return j.get<double>();
    if (j.is_object() && j.contains("score") && j["score"].is_number()) return j["score"].get<double>();
  } catch (const nlohmann::json::exception&) {
  }
  throw TransportError("scorer reply has no numeric score: " + res.body.substr(0, 200));
}

Selection select_best(const CandidateSet& set, Scorer* scorer, const raster::RenderConfig& render) {
  if (set.candidates.empty()) throw ArgumentError("no candidates to select from");
  const auto& cs = set.candidates;
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(cs[a].round, cs[a].repeat) < std::pair(cs[b].round, cs[b].repeat);
  });

  Selection sel;
  sel.scores.assign(cs.size(), std::nullopt);
  if (scorer) {
    try {
      for (std::size_t i = 0; i < cs.size(); ++i)
        sel.scores[i] = cs[i].score ? *cs[i].score : scorer->score(raster::render(cs[i].parsed.doc, render), cs[i].parsed.doc);
      sel.index = order[0];
      for (std::size_t i : order)
        if (*sel.scores[i] > *sel.scores[sel.index]) sel.index = i;
      return sel;
    } catch (const TransportError& e) {
      sel.warning = std::string("scorer unavailable, using fallback selection: ") + e.what();
    }
  } else {
    sel.warning = "no scorer configured, using fallback selection";
  }
  sel.used_fallback = true;
  sel.scores.assign(cs.size(), std::nullopt);
  auto key = [&](std::size_t i) {
    const auto warnings = svg::validate_template(cs[i].parsed).warnings.size();
    return std::pair(warnings, -static_cast<long>(cs[i].parsed.doc.paths.size()));
  };
  sel.index = order[0];
  auto best = key(sel.index);
  for (std::size_t i : order) {
    const auto k = key(i);
    if (k < best) {
      best = k;
      sel.index = i;
    }
  }
  return sel;
}

}  // namespace svgsmith::llm
