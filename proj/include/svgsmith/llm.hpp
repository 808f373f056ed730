#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svgsmith/http_client.hpp"
#include "svgsmith/raster.hpp"
#include "svgsmith/svg.hpp"

namespace svgsmith::llm {

enum class PromptId { System, Expansion, ScriptGeneration, Rectification, Editing };

std::string_view prompt_text(PromptId id);
std::string_view prompt_name(PromptId id);
/// Replaced by the user's prompt in the expansion text.
inline constexpr std::string_view kTextPlaceholder = "TEXT_PROMPT";

struct Message {
  std::string role;  ///< system, user or assistant
  std::string text;
  std::vector<std::uint8_t> image_png;  ///< attached image, empty if none
  bool operator==(const Message&) const = default;
};
using Conversation = std::vector<Message>;

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Sends the whole conversation and returns the assistant's reply text.
  virtual std::string send(const Conversation& messages) = 0;
};

struct HttpTransportConfig {
  std::string endpoint;
  std::string api_key;
  std::string model = "claude-3-5-sonnet";
  util::HttpPolicy policy;
  int max_in_flight = 4;

  /// CHAT2SVG_LLM_ENDPOINT (required), CHAT2SVG_LLM_API_KEY, CHAT2SVG_LLM_MODEL.
  static HttpTransportConfig from_env();
};

/// Chat-completions JSON over HTTP: role-tagged messages, images as base64
/// PNG data URLs; the reply is choices[0].message.content.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(HttpTransportConfig cfg);
  std::string send(const Conversation& messages) override;

  static std::string request_body(const Conversation& messages, const std::string& model);
  static std::string parse_reply(const std::string& body);

 private:
  HttpTransportConfig cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

/// Replays canned replies in order, or answers through a handler. Records
/// every request. Thread-safe.
class ScriptedTransport final : public ChatTransport {
  struct Reply {
    std::string text;
    bool error = false;
    bool file = false;  ///< text is a path, read when the reply is used
  };

 public:
  using Handler = std::function<std::string(const Conversation&)>;

  explicit ScriptedTransport(std::vector<std::string> replies);
  explicit ScriptedTransport(Handler handler);
  /// JSON {"replies": [text | {"error": message} | {"file": path}, ...]}. Error
  /// entries throw TransportError; file entries are read when used, relative
  /// paths against `base` (the fixture's directory for from_file).
  static std::unique_ptr<ScriptedTransport> from_file(const std::filesystem::path& file);
  static std::unique_ptr<ScriptedTransport> from_json(std::string_view json, const std::filesystem::path& base = {});

  std::string send(const Conversation& messages) override;
  std::vector<Conversation> requests() const;
  std::size_t remaining() const;

 private:
  explicit ScriptedTransport(std::deque<Reply> replies) : replies_(std::move(replies)) {}
  mutable std::mutex mu_;
  std::deque<Reply> replies_;
  Handler handler_;
  std::vector<Conversation> requests_;
};

struct ExpandedPrompt {
  std::string prompt;  ///< the user's original text
  std::string scene_description;
  std::string object_details;
  std::string component_breakdown;
  std::string layout_plan;
  std::string raw;
};

/// Splits an expansion reply into its four sections. Throws FormatError when
/// any section is missing or empty.
ExpandedPrompt parse_expansion(std::string_view reply);
/// Contents of the first ```svg fenced block. Throws FormatError if absent.
std::string extract_svg_block(std::string_view reply);

Conversation new_conversation();

struct PipelineConfig {
  raster::RenderConfig render{2, 1.0, {1, 1, 1}, 512, 0, 16};  ///< used for rectification images
  int parallel_repeats = 1;  ///< repeats run concurrently when > 1
  /// Called as each stage starts: "expanding", "scripting" or "rectifying".
  std::function<void(const std::string& stage, int repeat, int round)> on_stage;
};

struct Candidate {
  svg::ParsedSvg parsed;
  int round = 0;   ///< 0 = base template, r = after r rectifications
  int repeat = 1;  ///< 1-based
  std::optional<double> score;
};

struct GenerationFailure {
  int repeat = 0;
  int round = 0;
  std::string code;
  std::string message;
};

struct CandidateSet {
  std::vector<Candidate> candidates;  ///< ordered by (repeat, round)
  std::vector<GenerationFailure> failures;
};

class Pipeline {
 public:
  explicit Pipeline(ChatTransport& transport, PipelineConfig cfg = {});

  /// Each call appends its turns to `convo`, so later stages see the full context.
  ExpandedPrompt expand_prompt(Conversation& convo, std::string_view prompt) const;
  svg::ParsedSvg generate_script(Conversation& convo, const ExpandedPrompt& expanded) const;
  /// Sends the rectification prompt with `rendered`; ids of the reply are renumbered before validation.
  svg::ParsedSvg rectify(Conversation& convo, const svg::ParsedSvg& tpl, const raster::RasterImage& rendered) const;

  // Single-stage calls that rebuild the needed context.
  ExpandedPrompt expand_prompt(std::string_view prompt) const;
  svg::ParsedSvg generate_script(const ExpandedPrompt& expanded) const;
  svg::ParsedSvg rectify(const svg::ParsedSvg& tpl, const raster::RasterImage& rendered) const;

  /// For each of `repeats` conversations: one template plus `rounds` rectified revisions.
  CandidateSet generate_candidates(std::string_view prompt, int rounds, int repeats) const;

  const PipelineConfig& config() const { return cfg_; }

 private:
  svg::ParsedSvg request_template(Conversation& convo, Message request, bool renumber) const;
  ChatTransport& transport_;
  PipelineConfig cfg_;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  /// Higher is better. Throws TransportError when the scorer is unavailable.
  virtual double score(const raster::RasterImage& image, const svg::Document& doc) = 0;
};

/// POSTs the PNG and reads {"score": x} (or a bare number) from the reply.
class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(std::string endpoint, util::HttpPolicy policy = {});
  double score(const raster::RasterImage& image, const svg::Document& doc) override;

 private:
  std::string endpoint_;
  util::HttpPolicy policy_;
};

struct Selection {
  std::size_t index = 0;  ///< into CandidateSet::candidates
  bool used_fallback = false;
  std::string warning;
  std::vector<std::optional<double>> scores;
};

/// Argmax of the scorer, ties going to the lowest (round, repeat). Without a
/// scorer, or if it fails: fewest validation warnings, then most paths, then
/// the same tie order.
Selection select_best(const CandidateSet& set, Scorer* scorer, const raster::RenderConfig& render = {2, 1.0, {1, 1, 1}, 512, 0, 16});

}  // namespace svgsmith::llm
