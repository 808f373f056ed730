// Command-line front end: generate, optimize, edit, serve, validate.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "svgsmith/error.hpp"
#include "svgsmith/gateway.hpp"
#include "svgsmith/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svgsmith;

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

void write_trace(const fs::path& p, const std::vector<optim::LossTerms>& trace) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  optim::write_trace_csv(out, trace);
}

// Flags shared by every verb that reaches a model or an enhancer.
struct ServiceFlags {
  std::string llm_script;
  std::string target_image;
  std::string masks_dir;
  bool echo_target = false;

  void add(CLI::App* app, bool with_llm = true) {
    if (with_llm)
      app->add_option("--llm-script", llm_script, "canned model replies (JSON) instead of CHAT2SVG_LLM_ENDPOINT")
          ->check(CLI::ExistingFile);
    app->add_option("--target-image", target_image, "enhanced target PNG instead of CHAT2SVG_ENHANCER_ENDPOINT")
        ->check(CLI::ExistingFile);
    app->add_option("--masks-dir", masks_dir, "mask directory (template/, target/) instead of CHAT2SVG_SAM_ENDPOINT")
        ->check(CLI::ExistingDirectory);
    app->add_flag("--echo-target", echo_target, "use the rendered template itself as the target");
  }

  gateway::Services build(bool need_llm) const {
    gateway::Services s;
    if (!llm_script.empty()) {
      s.transport = llm::ScriptedTransport::from_file(llm_script);
    } else if (need_llm) {
      s.transport = std::make_shared<llm::HttpChatTransport>(llm::HttpTransportConfig::from_env());
    }
    if (!target_image.empty())
      s.enhancer = std::make_shared<enhance::FileEnhancer>(target_image);
    else if (echo_target)
      s.enhancer = std::make_shared<enhance::EchoEnhancer>();
    else if (auto url = env("CHAT2SVG_ENHANCER_ENDPOINT"); !url.empty())
      s.enhancer = std::make_shared<enhance::HttpEnhancer>(url);
    if (!masks_dir.empty())
      s.segmenter = std::make_shared<enhance::DirectorySegmenter>(masks_dir);
    else if (auto url = env("CHAT2SVG_SAM_ENDPOINT"); !url.empty())
      s.segmenter = std::make_shared<enhance::HttpSegmenter>(url);
    if (auto url = env("CHAT2SVG_SCORER_ENDPOINT"); !url.empty()) s.scorer = std::make_shared<llm::HttpScorer>(url);
    return s;
  }

  void require_enhancer(const gateway::Services& s) const {
    if (!s.enhancer)
      throw ConfigError("no target source: pass --target-image or --echo-target, or set CHAT2SVG_ENHANCER_ENDPOINT");
  }
};

struct OptimFlags {
  int iters = 500;
  int resolution = 0;
  int supersampling = 2;
  bool freeze_colors = false;
  int snapshot_every = 0;

  void add(CLI::App* app) {
    app->add_option("--iters", iters, "iterations per optimization stage")->check(CLI::PositiveNumber);
    app->add_option("--resolution", resolution, "render size in pixels (0 = canvas size)")->check(CLI::NonNegativeNumber);
    app->add_option("--supersampling", supersampling, "samples per pixel side (1, 2 or 4)");
    app->add_flag("--freeze-colors", freeze_colors, "keep colors fixed in the point stage");
    app->add_option("--snapshot-every", snapshot_every, "write an SVG snapshot every K iterations")
        ->check(CLI::NonNegativeNumber);
  }

  optim::OptimizationConfig config() const {
    optim::OptimizationConfig cfg;
    cfg.iters_per_stage = iters;
    cfg.render.resolution = resolution;
    cfg.render.supersampling = supersampling;
    cfg.freeze_colors = freeze_colors;
    cfg.validate();
    return cfg;
  }

  optim::SnapshotFn snapshots(const fs::path& out) const {
    if (snapshot_every <= 0) return {};
    fs::create_directories(out / "snapshots");
    return [dir = out / "snapshots"](int it, const svg::Document& doc) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%05d.svg", it);
      write_file(dir / name, svg::serialize(doc));
    };
  }
};

class StderrReporter final : public gateway::Reporter {
 public:
  explicit StderrReporter(bool quiet) : quiet_(quiet) {}
  void report(gateway::Stage stage, double progress, std::optional<double> loss, const std::string&) override {
    if (quiet_ || (stage == last_ && progress - shown_ < 0.05)) return;
    last_ = stage;
    shown_ = progress;
    std::cerr << gateway::stage_name(stage) << ' ' << static_cast<int>(progress * 100) << '%';
    if (loss) std::cerr << " loss=" << *loss;
    std::cerr << '\n';
  }

 private:
  bool quiet_;
  gateway::Stage last_ = gateway::Stage::Failed;
  double shown_ = -1;
};

json candidates_json(const gateway::GenerationOutput& g, const fs::path& out) {
  fs::create_directories(out / "candidates");
  json list = json::array();
  for (std::size_t i = 0; i < g.candidates.candidates.size(); ++i) {
    const auto& c = g.candidates.candidates[i];
    const std::string file =
        "candidates/repeat" + std::to_string(c.repeat) + "_round" + std::to_string(c.round) + ".svg";
    write_file(out / file, svg::serialize_template(c.parsed));
    json e{{"index", i}, {"repeat", c.repeat}, {"round", c.round}, {"file", file}};
    e["score"] = g.selection.scores.at(i) ? json(*g.selection.scores[i]) : json(nullptr);
    list.push_back(e);
  }
  json failures = json::array();
  for (const auto& f : g.candidates.failures)
    failures.push_back({{"repeat", f.repeat}, {"round", f.round}, {"error", f.code}, {"message", f.message}});
  json j{{"count", list.size()},          {"selected", g.selection.index},
         {"fallback", g.selection.used_fallback}, {"candidates", list},
         {"failures", failures}};
  if (!g.selection.warning.empty()) j["warning"] = g.selection.warning;
  return j;
}

int cmd_generate(const std::string& prompt, const fs::path& out, int rounds, int repeats, int parallel,
                 const ServiceFlags& sf, const OptimFlags& of, bool quiet) {
  gateway::Services services = sf.build(true);
  sf.require_enhancer(services);
  gateway::GenerationSettings settings;
  settings.rounds = rounds;
  settings.repeats = repeats;
  settings.parallel_repeats = parallel;
  settings.optimization = of.config();
  fs::create_directories(out);
  settings.snapshot = of.snapshots(out);
  settings.snapshot_every = of.snapshot_every;

  StderrReporter reporter(quiet);
  const auto g = gateway::run_generation(prompt, services, settings, &reporter);
  write_file(out / "template.svg", svg::serialize_template(g.templ));
  raster::write_png(g.target, out / "target.png");
  write_file(out / "enhanced.svg", svg::serialize(g.enhanced));
  write_file(out / "optimized.svg", svg::serialize(g.optimized.doc));
  write_trace(out / "trace.csv", g.trace);
  const json cands = candidates_json(g, out);
  write_file(out / "candidates.json", cands.dump(2) + "\n");
  const auto session = session::new_session(session::new_session_id(), prompt, g.optimized.doc);
  write_file(out / "session.json", session::save_session(session));

  std::cout << json{{"status", "ok"},
                    {"out", out.string()},
                    {"candidates", cands["count"]},
                    {"selected", cands["selected"]},
                    {"paths", g.optimized.doc.paths.size()},
                    {"session_id", session.session_id}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_optimize(const fs::path& svg_file, const fs::path& target_file, const fs::path& out, const OptimFlags& of,
                 bool quiet) {
  const svg::ParsedSvg parsed = svg::parse_svg(read_file(svg_file), {.strict = false});
  const raster::RasterImage target = raster::read_png(target_file);
  optim::OptimizationConfig cfg = of.config();
  if (cfg.render.resolution == 0) cfg.render.resolution = std::max(target.width, target.height);
  const auto [w, h] = cfg.render.output_size(parsed.doc.canvas);
  if (w != target.width || h != target.height)
    throw ArgumentError("target is " + std::to_string(target.width) + "x" + std::to_string(target.height) +
                        " but the document renders at " + std::to_string(w) + "x" + std::to_string(h));
  fs::create_directories(out);

  StderrReporter reporter(quiet);
  optim::PipelineOptions po;
  po.progress = gateway::progress_bridge(&reporter, 0.0);
  po.snapshot = of.snapshots(out);
  po.snapshot_every = of.snapshot_every;
  const shape::FourierDecoder decoder;
  const auto r = optim::optimize_document(parsed.doc, target, cfg, decoder, po);
  std::vector<optim::LossTerms> trace = r.latent.loss_trace;
  trace.insert(trace.end(), r.point.loss_trace.begin(), r.point.loss_trace.end());
  write_file(out / "template.svg", svg::serialize(parsed.doc));
  raster::write_png(target, out / "target.png");
  write_file(out / "optimized.svg", svg::serialize(r.doc));
  write_trace(out / "trace.csv", trace);
  std::cout << json{{"status", "ok"},
                    {"out", out.string()},
                    {"paths", r.doc.paths.size()},
                    {"final_loss", trace.empty() ? 0.0 : trace.back().total}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_edit(const fs::path& session_file, const std::string& instruction, const fs::path& out,
             const ServiceFlags& sf, const OptimFlags& of) {
  session::EditSession s = session::load_session(read_file(session_file));
  gateway::Services services = sf.build(true);
  gateway::GenerationSettings settings;
  settings.optimization = of.config();
  const session::TargetFn target = gateway::edit_target(services, settings);
  const shape::FourierDecoder decoder;

  session::EditResult edit = session::apply_edit(s, *services.transport, instruction);
  if (!edit.ops.modified.empty() || !edit.ops.added.ids.empty()) sf.require_enhancer(services);
  const auto run = session::complete_edit(s, instruction, std::move(edit), target, settings.optimization, decoder);

  fs::create_directories(out);
  write_file(out / "session.json", session::save_session(s));
  write_file(out / "optimized.svg", svg::serialize(s.current));
  if (!run.target_png.empty()) write_file(out / "target.png", std::string(run.target_png.begin(), run.target_png.end()));
  json ops{{"modified", run.edit.ops.modified},
           {"removed", run.edit.ops.removed},
           {"added", {{"start_path_id", run.edit.ops.added.start_path_id}, {"ids", run.edit.ops.added.ids}}}};
  std::cout << json{{"status", "ok"},
                    {"ops", ops},
                    {"warnings", run.edit.warnings},
                    {"failed", run.optimized.failed},
                    {"history_length", s.history.size()}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_validate(const fs::path& svg_file) {
  const svg::ParsedSvg parsed = svg::parse_svg(read_file(svg_file), {.strict = false});
  const svg::ValidationReport report = svg::validate_template(parsed);
  json errors = json::array(), warnings = json::array();
  auto issue = [](const svg::Issue& i) { return json{{"path_id", i.path_id}, {"code", i.code}, {"message", i.message}}; };
  for (const auto& e : report.errors) errors.push_back(issue(e));
  for (const auto& w : report.warnings) warnings.push_back(issue(w));
  std::cout << json{{"valid", report.ok()}, {"paths", parsed.doc.paths.size()}, {"errors", errors}, {"warnings", warnings}}
                   .dump()
            << '\n';
  return report.ok() ? 0 : 1;
}

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

int cmd_serve(const std::string& host, int port, const fs::path& store, int workers, const ServiceFlags& sf,
              const OptimFlags& of, int rounds, int repeats) {
  gateway::ServerConfig cfg;
  cfg.store = store;
  cfg.workers = workers;
  cfg.services = sf.build(true);
  sf.require_enhancer(cfg.services);
  cfg.settings.rounds = rounds;
  cfg.settings.repeats = repeats;
  cfg.settings.optimization = of.config();
  gateway::Server server(cfg);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = server.start(host, port);
  std::cout << json{{"status", "listening"}, {"host", host}, {"port", bound}}.dump() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svgsmith: text to SVG with model-written templates and two-stage optimization"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress on stderr");

  std::string prompt, out_dir, svg_file, target_file, session_file, instruction;
  int rounds = 2, repeats = 5, parallel = 1;
  ServiceFlags sf;
  OptimFlags of;

  auto* gen = app.add_subcommand("generate", "prompt to optimized SVG");
  gen->add_option("--prompt", prompt, "text prompt")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--rounds", rounds, "rectification rounds")->check(CLI::NonNegativeNumber);
  gen->add_option("--repeats", repeats, "independent generation repeats")->check(CLI::PositiveNumber);
  gen->add_option("--parallel", parallel, "repeats run concurrently")->check(CLI::PositiveNumber);
  sf.add(gen);
  of.add(gen);

  auto* opt = app.add_subcommand("optimize", "optimize an SVG against a target image (offline)");
  opt->add_option("--svg", svg_file, "input SVG")->required()->check(CLI::ExistingFile);
  opt->add_option("--target", target_file, "target PNG")->required()->check(CLI::ExistingFile);
  opt->add_option("--out", out_dir, "output directory")->required();
  of.add(opt);

  auto* ed = app.add_subcommand("edit", "apply one instruction to a saved session");
  ed->add_option("--session", session_file, "session.json from generate or a previous edit")
      ->required()
      ->check(CLI::ExistingFile);
  ed->add_option("--instruction", instruction, "editing instruction")->required();
  ed->add_option("--out", out_dir, "output directory")->required();
  sf.add(ed);
  of.add(ed);

  std::string host = "127.0.0.1", store = "sessions";
  int port = 8080, workers = 2;
  auto* srv = app.add_subcommand("serve", "HTTP service");
  srv->add_option("--host", host, "bind address");
  srv->add_option("--port", port, "port (0 picks a free one)")->check(CLI::Range(0, 65535));
  srv->add_option("--store", store, "session store directory");
  srv->add_option("--workers", workers, "background job threads")->check(CLI::PositiveNumber);
  srv->add_option("--rounds", rounds, "rectification rounds")->check(CLI::NonNegativeNumber);
  srv->add_option("--repeats", repeats, "independent generation repeats")->check(CLI::PositiveNumber);
  sf.add(srv);
  of.add(srv);

  auto* val = app.add_subcommand("validate", "check an SVG against the template rules");
  val->add_option("--svg", svg_file, "input SVG")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(prompt, out_dir, rounds, repeats, parallel, sf, of, quiet);
    if (*opt) return cmd_optimize(svg_file, target_file, out_dir, of, quiet);
    if (*ed) return cmd_edit(session_file, instruction, out_dir, sf, of);
    if (*srv) return cmd_serve(host, port, store, workers, sf, of, rounds, repeats);
    if (*val) return cmd_validate(svg_file);
  } catch (const FormatError& e) {
    std::cout << json{{"error", e.code()}, {"message", e.what()}, {"raw", e.raw().substr(0, 2000)}}.dump() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cout << gateway::error_json(e.code(), e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cout << gateway::error_json("INTERNAL", e.what()) << '\n';
    return 1;
  }
  return 2;
}
