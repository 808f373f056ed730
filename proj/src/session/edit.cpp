#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "svgsmith/error.hpp"
#include "svgsmith/session.hpp"
#include "svgsmith/util.hpp"

namespace svgsmith::session {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_token(std::string s) {
  for (const char* q : {"\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"}) {
    for (auto at = s.find(q); at != std::string::npos; at = s.find(q)) s.erase(at, 3);
  }
  const char* junk = " \t\r'\"`*";
  const auto b = s.find_first_not_of(junk);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(junk) - b + 1);
}

std::vector<std::string> split_ids(std::string_view list) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (at <= list.size()) {
    const auto comma = std::min(list.find(',', at), list.size());
    std::string id = strip_token(std::string(list.substr(at, comma - at)));
    if (!id.empty()) out.push_back(std::move(id));
    at = comma + 1;
  }
  return out;
}

// Text after "<label>:" on the last line that carries the label.
std::optional<std::string> summary_line(const std::string& reply, const std::string& lowered, std::string_view label) {
  const auto at = lowered.rfind(label);
  if (at == std::string::npos) return std::nullopt;
  const auto colon = reply.find(':', at + label.size());
  const auto eol = std::min(reply.find('\n', at), reply.size());
  if (colon == std::string::npos || colon > eol) return std::string();
  return reply.substr(colon + 1, eol - colon - 1);
}

std::vector<std::string> bracket_ids(const std::string& text) {
  const auto open = text.find('['), close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return {};
  return split_ids(std::string_view(text).substr(open + 1, close - open - 1));
}

bool same_shape(const svg::Path& a, const svg::Path& b) {
  return a.commands == b.commands && a.fill == b.fill && a.stroke == b.stroke && a.transform == b.transform &&
         a.closed == b.closed;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::string join(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out + "]";
}

// Problems that make an edited script unusable; empty when it is fine.
std::string script_problem(const svg::ParsedSvg& parsed) {
  std::string out;
  for (const auto& e : parsed.parse_issues.errors) out += e.message + "\n";
  std::set<std::string> seen;
  for (const auto& p : parsed.doc.paths) {
    if (p.id.empty()) out += "an element has no id\n";
    else if (!seen.insert(p.id).second) out += "id " + p.id + " is used more than once\n";
  }
  return out;
}

}  // namespace

std::optional<EditOps> parse_operation_summary(std::string_view reply_view) {
  const std::string reply(reply_view);
  const std::string lowered = lower(reply);
  const auto mod = summary_line(reply, lowered, "element modification");
  const auto rem = summary_line(reply, lowered, "element removal");
  const auto add = summary_line(reply, lowered, "element addition");
  if (!mod && !rem && !add) return std::nullopt;
  EditOps ops;
  if (mod) ops.modified = bracket_ids(*mod);
  if (rem) ops.removed = bracket_ids(*rem);
  if (add) {
    ops.added.ids = bracket_ids(*add);
    const auto open = add->find('[');
    std::string start = strip_token(add->substr(0, open == std::string::npos ? add->size() : open));
    while (!start.empty() && (start.back() == ',' || start.back() == ' ')) start.pop_back();
    start = strip_token(start);
    const std::string ls = lower(start);
    if (ls == "none" || ls == "empty" || ls == "null" || ls == "n/a") start.clear();
    ops.added.start_path_id = start;
  }
  return ops;
}

EditOps diff_documents(const svg::Document& pre, const svg::Document& post) {
  std::map<std::string, const svg::Path*> before, after;
  for (const auto& p : pre.paths) before[p.id] = &p;
  for (const auto& p : post.paths) after[p.id] = &p;
  EditOps ops;
  for (const auto& p : pre.paths) {
    const auto it = after.find(p.id);
    if (it == after.end()) ops.removed.push_back(p.id);
    else if (!same_shape(p, *it->second)) ops.modified.push_back(p.id);
  }
  std::string last_kept;
  bool start_set = false;
  for (const auto& p : post.paths) {
    if (before.count(p.id)) {
      last_kept = p.id;
      continue;
    }
    if (!start_set) {
      ops.added.start_path_id = last_kept;
      start_set = true;
    }
    ops.added.ids.push_back(p.id);
  }
  return ops;
}

std::map<std::string, svg::Path> EditSession::frozen_geometry() const {
  std::map<std::string, svg::Path> out;
  for (const auto& p : current.paths) out.emplace(p.id, p);
  return out;
}

std::string new_session_id() {
  std::random_device rd;
  std::uniform_int_distribution<int> nibble(0, 15);
  std::string id;
  for (int i = 0; i < 16; ++i) id += "0123456789abcdef"[nibble(rd)];
  return id;
}

EditSession new_session(std::string session_id, std::string prompt, svg::Document doc) {
  EditSession s;
  s.session_id = std::move(session_id);
  s.prompt = std::move(prompt);
  s.initial = svg::renumber_ids(std::move(doc)).doc;
  s.current = s.initial;
  return s;
}

EditResult reconcile_edit(const EditSession& session, const std::string& reply) {
  EditResult out;
  out.reply = reply;
  const svg::ParsedSvg parsed = svg::parse_svg(llm::extract_svg_block(reply), {.strict = false});
  if (const std::string problem = script_problem(parsed); !problem.empty())
    throw FormatError("edited script is unusable: " + problem, reply);

  svg::Document post = parsed.doc;
  if (!(post.canvas == session.current.canvas)) out.warnings.push_back("edited script changed the canvas; kept the original");
  post.canvas = session.current.canvas;
  // Compare against the current document as the model saw it (colors as hex).
  const svg::Document pre = svg::parse_svg(svg::serialize(session.current), {.strict = false}).doc;
  EditOps diff = diff_documents(pre, post);

  out.claimed = parse_operation_summary(reply);
  if (!out.claimed) {
    out.warnings.push_back("reply has no operation summary; using the script diff");
  } else {
    const EditOps& c = *out.claimed;
    if (as_set(c.modified) != as_set(diff.modified))
      out.warnings.push_back("summary lists modified " + join(c.modified) + " but the script changes " +
                             join(diff.modified));
    if (as_set(c.removed) != as_set(diff.removed))
      out.warnings.push_back("summary lists removed " + join(c.removed) + " but the script removes " +
                             join(diff.removed));
    if (as_set(c.added.ids) != as_set(diff.added.ids))
      out.warnings.push_back("summary lists added " + join(c.added.ids) + " but the script adds " +
                             join(diff.added.ids));
    else if (!diff.added.ids.empty() && c.added.start_path_id != diff.added.start_path_id)
      out.warnings.push_back("summary inserts after \"" + c.added.start_path_id + "\" but the script inserts after \"" +
                             diff.added.start_path_id + "\"");
  }

  const std::set<std::string> modified = as_set(diff.modified);
  const auto frozen = session.frozen_geometry();
  svg::Document doc = svg::renumber_ids(post).doc;
  std::map<std::string, std::string> post_to_new;
  for (std::size_t i = 0; i < post.paths.size(); ++i) {
    const std::string orig = post.paths[i].id;
    const std::string now = doc.paths[i].id;
    post_to_new[orig] = now;
    const auto f = frozen.find(orig);
    if (f == frozen.end()) continue;
    out.renamed[orig] = now;
    if (!modified.count(orig)) {
      doc.paths[i] = f->second;
      doc.paths[i].id = now;
    }
  }
  for (auto& id : diff.added.ids) id = post_to_new.at(id);
  out.ops = std::move(diff);
  out.doc = std::move(doc);
  return out;
}

EditResult apply_edit(const EditSession& session, llm::ChatTransport& transport, std::string_view instruction) {
  if (instruction.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ArgumentError("edit instruction is empty");
  llm::Conversation convo = llm::new_conversation();
  std::string text(llm::prompt_text(llm::PromptId::Editing));
  text += "\n\nEditing instruction: ";
  text += instruction;
  text += "\n\nOriginal SVG code:\n```svg\n" + svg::serialize(session.current) + "```";
  convo.push_back({"user", std::move(text), {}});
  std::string reply = transport.send(convo);
  convo.push_back({"assistant", reply, {}});
  try {
    return reconcile_edit(session, reply);
  } catch (const TransportError&) {
    throw;
  } catch (const Error& first) {
    convo.push_back({"user",
                     std::string("Your reply could not be used (") + first.what() +
                         "). Reply with the complete edited SVG code in a ```svg block followed by the operation "
                         "summary.",
                     {}});
    reply = transport.send(convo);
    convo.push_back({"assistant", reply, {}});
    return reconcile_edit(session, reply);
  }
}

SelectiveResult selective_optimize(const EditResult& edit, const raster::RasterImage* target,
                                   const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                                   const optim::ProgressFn& progress) {
  SelectiveResult out;
  out.doc = edit.doc;
  std::set<std::string> wanted(edit.ops.added.ids.begin(), edit.ops.added.ids.end());
  for (const auto& m : edit.ops.modified)
    if (const auto it = edit.renamed.find(m); it != edit.renamed.end()) wanted.insert(it->second);

  std::vector<bool> active(edit.doc.paths.size(), false);
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = wanted.count(edit.doc.paths[i].id) > 0;
  auto any = [&] { return std::find(active.begin(), active.end(), true) != active.end(); };
  if (!any()) return out;
  if (!target) throw ArgumentError("a target image is required to optimize edited paths");

  auto finite = [](const svg::Path& p) {
    for (const Vec2& v : p.control_points())
      if (!std::isfinite(v.x) || !std::isfinite(v.y)) return false;
    for (double v : p.transform.entries())
      if (!std::isfinite(v)) return false;
    return true;
  };
  std::vector<bool> dropped(active.size(), false);
  while (any()) {
    // A failed path that is not even finite stays out of later attempts.
    svg::Document work = edit.doc;
    work.paths.clear();
    optim::PipelineOptions opts;
    opts.progress = progress;
    std::vector<std::size_t> slot;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (dropped[i]) continue;
      work.paths.push_back(edit.doc.paths[i]);
      opts.active.push_back(active[i]);
      slot.push_back(i);
    }
    try {
      const optim::PipelineResult res = optim::optimize_document(work, *target, cfg, decoder, opts);
      for (std::size_t k = 0; k < slot.size(); ++k) out.doc.paths[slot[k]] = res.doc.paths[k];
      out.latent_trace = res.latent.loss_trace;
      out.point_trace = res.point.loss_trace;
      out.cancelled = res.cancelled;
      out.optimized = true;
      break;
    } catch (const OptimizationError& e) {
      std::size_t bad = active.size();
      for (std::size_t i = 0; i < active.size(); ++i)
        if (active[i] && edit.doc.paths[i].id == e.path_id()) bad = i;
      if (bad == active.size()) throw;
      active[bad] = false;
      dropped[bad] = !finite(edit.doc.paths[bad]);
      out.failed.push_back(e.path_id());
      out.warnings.push_back(std::string("optimization failed, kept template geometry: ") + e.what());
    }
  }
  for (std::size_t i = 0; i < active.size(); ++i)
    if (!active[i]) out.doc.paths[i] = edit.doc.paths[i];
  return out;
}

void commit(EditSession& session, std::string instruction, const EditResult& edit, const SelectiveResult& opt,
            std::string target_hash) {
  HistoryEntry h;
  h.instruction = std::move(instruction);
  h.pre_doc = session.current;
  h.post_doc = edit.doc;
  h.ops = edit.ops;
  h.optimized_doc = opt.doc;
  h.warnings = edit.warnings;
  h.warnings.insert(h.warnings.end(), opt.warnings.begin(), opt.warnings.end());
  h.target_hash = std::move(target_hash);
  session.history.push_back(std::move(h));
  session.current = opt.doc;
}

EditRun complete_edit(EditSession& session, std::string_view instruction, EditResult edit, const TargetFn& target,
                      const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                      const optim::ProgressFn& progress) {
  EditRun run;
  run.edit = std::move(edit);
  const bool needs_target = !run.edit.ops.modified.empty() || !run.edit.ops.added.ids.empty();
  std::optional<raster::RasterImage> tgt;
  std::string hash;
  if (needs_target) {
    if (!target) throw ConfigError("this edit needs a target image but no target source is configured");
    run.target_png = raster::encode_png(target(run.edit.doc));
    hash = util::sha256_hex(run.target_png);
    // Optimize against the stored PNG so a reloaded session replays identically.
    tgt = raster::decode_png(run.target_png);
  }
  run.optimized = selective_optimize(run.edit, tgt ? &*tgt : nullptr, cfg, decoder, progress);
  if (!run.optimized.cancelled) commit(session, std::string(instruction), run.edit, run.optimized, hash);
  return run;
}

EditRun run_edit(EditSession& session, llm::ChatTransport& transport, std::string_view instruction,
                 const TargetFn& target, const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder,
                 const optim::ProgressFn& progress) {
  return complete_edit(session, instruction, apply_edit(session, transport, instruction), target, cfg, decoder,
                       progress);
}

EditSession replay(const EditSession& recorded, llm::ChatTransport& transport, const TargetFn& target,
                   const optim::OptimizationConfig& cfg, const shape::ShapeDecoder& decoder) {
  EditSession s = new_session(recorded.session_id, recorded.prompt, recorded.initial);
  for (const auto& h : recorded.history) run_edit(s, transport, h.instruction, target, cfg, decoder);
  return s;
}

EditLocks::Lease& EditLocks::Lease::operator=(Lease&& o) noexcept {
  if (this != &o) {
    release();
    owner_ = std::exchange(o.owner_, nullptr);
    id_ = std::move(o.id_);
  }
  return *this;
}

void EditLocks::Lease::release() {
  if (!owner_) return;
  std::lock_guard<std::mutex> g(owner_->guard_);
  owner_->held_.erase(id_);
  owner_ = nullptr;
}

EditLocks::Lease EditLocks::try_acquire(const std::string& session_id) {
  std::lock_guard<std::mutex> g(guard_);
  if (!held_.insert(session_id).second) return {};
  return Lease(this, session_id);
}

bool EditLocks::busy(const std::string& session_id) const {
  std::lock_guard<std::mutex> g(guard_);
  return held_.count(session_id) > 0;
}

}  // namespace svgsmith::session
