#include <fstream>
#include <json.hpp>
#include <sstream>

#include "svgsmith/error.hpp"
#include "svgsmith/llm.hpp"
#include "svgsmith/util.hpp"

namespace svgsmith::llm {

using nlohmann::json;

HttpTransportConfig HttpTransportConfig::from_env() {
  HttpTransportConfig cfg;
  cfg.endpoint = util::env_or_empty("CHAT2SVG_LLM_ENDPOINT");
  if (cfg.endpoint.empty()) throw ConfigError("CHAT2SVG_LLM_ENDPOINT is not set");
  cfg.api_key = util::env_or_empty("CHAT2SVG_LLM_API_KEY");
  if (auto model = util::env_or_empty("CHAT2SVG_LLM_MODEL"); !model.empty()) cfg.model = model;
  return cfg;
}

HttpChatTransport::HttpChatTransport(HttpTransportConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("chat endpoint is empty");
  if (cfg_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

std::string HttpChatTransport::request_body(const Conversation& messages, const std::string& model) {
  json msgs = json::array();
  for (const auto& m : messages) {
    if (m.image_png.empty()) {
      msgs.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    json parts = json::array();
    parts.push_back({{"type", "text"}, {"text", m.text}});
    parts.push_back({{"type", "image_url"},
                     {"image_url", {{"url", "data:image/png;base64," + util::base64_encode(m.image_png)}}}});
    msgs.push_back({{"role", m.role}, {"content", parts}});
  }
  json body = {{"messages", msgs}};
  if (!model.empty()) body["model"] = model;
  return body.dump();
}

std::string HttpChatTransport::parse_reply(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw TransportError("chat endpoint returned non-JSON: " + body.substr(0, 200));
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty())
    throw TransportError("chat endpoint reply has no choices: " + body.substr(0, 200));
  const json& content = (*choices)[0].value("message", json::object()).value("content", json());
  if (content.is_string()) return content.get<std::string>();
  // Some providers return a list of content parts.
  if (content.is_array()) {
    std::string text;
    for (const auto& part : content)
      if (part.value("type", "") == "text") text += part.value("text", "");
    return text;
  }
  throw TransportError("chat endpoint reply has no message content");
}

std::string HttpChatTransport::send(const Conversation& messages) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < cfg_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    HttpChatTransport* self;
    ~Release() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  std::map<std::string, std::string> headers;
  if (!cfg_.api_key.empty()) headers["Authorization"] = "Bearer " + cfg_.api_key;
  const auto res = util::http_post(cfg_.endpoint, request_body(messages, cfg_.model), "application/json", headers,
                                   cfg_.policy);
  if (res.status < 200 || res.status >= 300)
    throw TransportError("chat endpoint answered HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
  return parse_reply(res.body);
}

ScriptedTransport::ScriptedTransport(std::vector<std::string> replies) {
  for (auto& r : replies) replies_.push_back({std::move(r), false});
}

ScriptedTransport::ScriptedTransport(Handler handler) : handler_(std::move(handler)) {}

std::unique_ptr<ScriptedTransport> ScriptedTransport::from_json(std::string_view text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("replay fixture is not valid JSON: ") + e.what(), std::string(text.substr(0, 200)));
  }
  if (!j.is_object() || !j.contains("replies") || !j["replies"].is_array())
    throw FormatError("replay fixture needs a \"replies\" array", std::string(text.substr(0, 200)));
  std::deque<Reply> replies;
  for (const auto& r : j["replies"]) {
    if (r.is_string())
      replies.push_back({r.get<std::string>(), false});
    else if (r.is_object() && r.contains("error"))
      replies.push_back({r["error"].get<std::string>(), true});
    else if (r.is_object() && r.contains("file") && r["file"].is_string())
      replies.push_back({(base / r["file"].get<std::string>()).string(), false, true});
    else
      throw FormatError("replay entries must be strings, {\"error\": ...} or {\"file\": ...}", r.dump());
  }
  return std::unique_ptr<ScriptedTransport>(new ScriptedTransport(std::move(replies)));
}

std::unique_ptr<ScriptedTransport> ScriptedTransport::from_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open replay fixture " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), file.parent_path());
}

std::string ScriptedTransport::send(const Conversation& messages) {
  std::unique_lock lock(mu_);
  requests_.push_back(messages);
  if (handler_) {
    Handler h = handler_;
    lock.unlock();
    return h(messages);
  }
  if (replies_.empty()) throw TransportError("no scripted reply left");
  Reply r = std::move(replies_.front());
  replies_.pop_front();
  if (r.error) throw TransportError(r.text);
  if (r.file) {
    std::ifstream in(r.text, std::ios::binary);
    if (!in) throw TransportError("scripted reply file missing: " + r.text);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  return r.text;
}

std::vector<Conversation> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t ScriptedTransport::remaining() const {
  std::lock_guard lock(mu_);
  return replies_.size();
}

}  // namespace svgsmith::llm
