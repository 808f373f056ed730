#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "svgsmith/error.hpp"
#include "svgsmith/session.hpp"
#include "svgsmith/util.hpp"

namespace svgsmith::session {
namespace {

using nlohmann::json;

// Geometry, ids and labels travel in the SVG text; colors are stored exactly
// alongside because the SVG form rounds them to hex.
json doc_to_json(const svg::Document& doc) {
  json style = json::array();
  for (const auto& p : doc.paths)
    style.push_back({{"fill", {p.fill.r, p.fill.g, p.fill.b, p.fill.a}},
                     {"stroke", {p.stroke.color.r, p.stroke.color.g, p.stroke.color.b, p.stroke.color.a}},
                     {"width", p.stroke.width}});
  return {{"svg", svg::serialize(doc)}, {"style", style}};
}

Rgba rgba_of(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()}; }

svg::Document doc_from_json(const json& j) {
  svg::Document doc = svg::parse_svg(j.at("svg").get<std::string>(), {.strict = false}).doc;
  const json& style = j.at("style");
  if (style.size() != doc.paths.size()) throw FormatError("style table does not match the path count", "");
  for (std::size_t i = 0; i < doc.paths.size(); ++i) {
    doc.paths[i].fill = rgba_of(style[i].at("fill"));
    doc.paths[i].stroke.color = rgba_of(style[i].at("stroke"));
    doc.paths[i].stroke.width = style[i].at("width").get<double>();
  }
  return doc;
}

json ops_to_json(const EditOps& ops) {
  return {{"modified", ops.modified},
          {"removed", ops.removed},
          {"added", {{"start_path_id", ops.added.start_path_id}, {"ids", ops.added.ids}}}};
}

EditOps ops_from_json(const json& j) {
  EditOps ops;
  ops.modified = j.at("modified").get<std::vector<std::string>>();
  ops.removed = j.at("removed").get<std::vector<std::string>>();
  ops.added.start_path_id = j.at("added").at("start_path_id").get<std::string>();
  ops.added.ids = j.at("added").at("ids").get<std::vector<std::string>>();
  return ops;
}

void check_id(const std::string& id) {
  static const std::regex ok("[A-Za-z0-9_-]{1,64}");
  if (!std::regex_match(id, ok)) throw ArgumentError("invalid session id: " + id);
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& file, std::string_view bytes) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move " + tmp + " into place: " + ec.message());
}

}  // namespace

std::string save_session(const EditSession& s) {
  json history = json::array();
  for (const auto& h : s.history)
    history.push_back({{"instruction", h.instruction},
                       {"pre", doc_to_json(h.pre_doc)},
                       {"post", doc_to_json(h.post_doc)},
                       {"ops", ops_to_json(h.ops)},
                       {"optimized", doc_to_json(h.optimized_doc)},
                       {"warnings", h.warnings},
                       {"target_hash", h.target_hash}});
  const json j = {{"version", kSchemaVersion},
                  {"session_id", s.session_id},
                  {"prompt", s.prompt},
                  {"initial", doc_to_json(s.initial)},
                  {"current", doc_to_json(s.current)},
                  {"history", history}};
  return j.dump(1);
}

EditSession load_session(std::string_view payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt session payload: ") + e.what(), std::string(payload.substr(0, 256)));
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer())
    throw FormatError("corrupt session payload: no schema version", std::string(payload.substr(0, 256)));
  const int version = j["version"].get<int>();
  if (version != kSchemaVersion)
    throw VersionError("session schema version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kSchemaVersion) + ")");
  try {
    EditSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.prompt = j.at("prompt").get<std::string>();
    s.initial = doc_from_json(j.at("initial"));
    s.current = doc_from_json(j.at("current"));
    for (const auto& h : j.at("history")) {
      HistoryEntry e;
      e.instruction = h.at("instruction").get<std::string>();
      e.pre_doc = doc_from_json(h.at("pre"));
      e.post_doc = doc_from_json(h.at("post"));
      e.ops = ops_from_json(h.at("ops"));
      e.optimized_doc = doc_from_json(h.at("optimized"));
      e.warnings = h.at("warnings").get<std::vector<std::string>>();
      e.target_hash = h.at("target_hash").get<std::string>();
      s.history.push_back(std::move(e));
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt session payload: ") + e.what(), std::string(payload.substr(0, 256)));
  } catch (const ParseError& e) {
    throw FormatError(std::string("corrupt session payload: ") + e.what(), std::string(payload.substr(0, 256)));
  }
}

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create session store " + root_.string() + ": " + ec.message());
}

std::filesystem::path SessionStore::dir(const std::string& session_id) const {
  check_id(session_id);
  return root_ / session_id;
}

void SessionStore::save(const EditSession& session) const {
  const auto d = dir(session.session_id);
  std::filesystem::create_directories(d / "assets");
  write_file_atomic(d / "session.json", save_session(session));
}

EditSession SessionStore::load(const std::string& session_id) const {
  const auto file = dir(session_id) / "session.json";
  if (!std::filesystem::exists(file)) throw IoError("no session " + session_id);
  return load_session(read_file(file));
}

bool SessionStore::exists(const std::string& session_id) const {
  return std::filesystem::exists(dir(session_id) / "session.json");
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(root_))
    if (e.is_directory() && std::filesystem::exists(e.path() / "session.json")) out.push_back(e.path().filename());
  std::sort(out.begin(), out.end());
  return out;
}

std::string SessionStore::put_asset(const std::string& session_id, std::string_view bytes,
                                    const std::string& ext) const {
  static const std::regex ok_ext("[a-z0-9]{1,8}");
  if (!std::regex_match(ext, ok_ext)) throw ArgumentError("invalid asset extension: " + ext);
  const std::string name = util::sha256_hex(bytes) + "." + ext;
  const auto d = dir(session_id) / "assets";
  std::filesystem::create_directories(d);
  if (!std::filesystem::exists(d / name)) write_file_atomic(d / name, bytes);
  return name;
}

std::string SessionStore::put_asset(const std::string& session_id, const std::vector<std::uint8_t>& png) const {
  return put_asset(session_id, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()), "png");
}

std::string SessionStore::asset(const std::string& session_id, const std::string& name) const {
  static const std::regex ok("[0-9a-f]{64}\\.[a-z0-9]{1,8}");
  if (!std::regex_match(name, ok)) throw ArgumentError("invalid asset name: " + name);
  const auto file = dir(session_id) / "assets" / name;
  if (!std::filesystem::exists(file)) throw IoError("no asset " + name);
  return read_file(file);
}

void SessionStore::remove(const std::string& session_id) const {
  std::error_code ec;
  std::filesystem::remove_all(dir(session_id), ec);
  if (ec) throw IoError("cannot remove session " + session_id + ": " + ec.message());
}

}  // namespace svgsmith::session
