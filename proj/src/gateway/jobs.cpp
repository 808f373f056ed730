#include <algorithm>
#include <json.hpp>

#include "svgsmith/error.hpp"
#include "svgsmith/gateway.hpp"

namespace svgsmith::gateway {
namespace {

constexpr std::string_view kStageNames[] = {"expanding", "scripting", "rectifying", "enhancing",
                                            "latent_opt", "point_opt",  "done",       "failed"};

// Share of overall progress reached when each stage begins.
constexpr double kGenerationEnd = 0.3;
constexpr double kEnhanceEnd = 0.4;

bool is_terminal(Stage s) { return s == Stage::Done || s == Stage::Failed; }

}  // namespace

std::string_view stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }

std::optional<Stage> stage_from_name(std::string_view name) {
  for (int i = 0; i < 8; ++i)
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  return std::nullopt;
}

std::string error_json(const std::string& code, const std::string& message) {
  return nlohmann::json{{"error", code}, {"message", message}}.dump();
}

PipelineJob::PipelineJob(std::string job_id, std::string session_id, std::string kind)
    : id_(std::move(job_id)), session_id_(std::move(session_id)), kind_(std::move(kind)) {}

void PipelineJob::push(Stage stage, double progress, std::optional<double> loss, const std::string& message) {
  // Caller holds mu_. Small progress steps within a stage are coalesced.
  const bool keep = events_.empty() || events_.back().stage != stage || !message.empty() || is_terminal(stage) ||
                    progress - events_.back().progress >= 0.01;
  if (!keep) return;
  events_.push_back({static_cast<int>(events_.size()) + 1, stage, progress, loss, message});
  cv_.notify_all();
}

void PipelineJob::report(Stage stage, double progress, std::optional<double> loss, const std::string& message) {
  std::lock_guard<std::mutex> g(mu_);
  if (is_terminal(stage_) || is_terminal(stage)) return;
  stage_ = std::max(stage_, stage);
  progress_ = std::clamp(std::max(progress_, progress), 0.0, 1.0);
  push(stage_, progress_, loss, message);
}

void PipelineJob::finish(const std::string& message) {
  std::lock_guard<std::mutex> g(mu_);
  if (is_terminal(stage_)) return;
  stage_ = Stage::Done;
  progress_ = 1.0;
  push(stage_, progress_, std::nullopt, message);
}

void PipelineJob::fail(const std::string& code, const std::string& message) {
  std::lock_guard<std::mutex> g(mu_);
  if (is_terminal(stage_)) return;
  stage_ = Stage::Failed;
  error_code_ = code;
  error_message_ = message;
  push(stage_, progress_, std::nullopt, message);
}

void PipelineJob::set_artifact(const std::string& stage, const std::string& ref) {
  std::lock_guard<std::mutex> g(mu_);
  artifacts_[stage] = ref;
}

Stage PipelineJob::stage() const {
  std::lock_guard<std::mutex> g(mu_);
  return stage_;
}

double PipelineJob::progress() const {
  std::lock_guard<std::mutex> g(mu_);
  return progress_;
}

bool PipelineJob::terminal() const {
  std::lock_guard<std::mutex> g(mu_);
  return is_terminal(stage_);
}

std::map<std::string, std::string> PipelineJob::artifacts() const {
  std::lock_guard<std::mutex> g(mu_);
  return artifacts_;
}

std::string PipelineJob::error_code() const {
  std::lock_guard<std::mutex> g(mu_);
  return error_code_;
}

std::string PipelineJob::error_message() const {
  std::lock_guard<std::mutex> g(mu_);
  return error_message_;
}

std::vector<JobEvent> PipelineJob::events_after(int after, std::chrono::milliseconds wait) const {
  std::unique_lock<std::mutex> lk(mu_);
  cv_.wait_for(lk, wait, [&] { return static_cast<int>(events_.size()) > after; });
  if (after < 0) after = 0;
  if (static_cast<std::size_t>(after) >= events_.size()) return {};
  return {events_.begin() + after, events_.end()};
}

WorkerPool::WorkerPool(int threads) {
  if (threads < 1) throw ArgumentError("worker pool needs at least one thread");
  for (int i = 0; i < threads; ++i)
    threads_.emplace_back([this] {
      while (true) {
        std::function<void()> task;
        {
          std::unique_lock<std::mutex> lk(mu_);
          cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
          if (queue_.empty()) return;
          task = std::move(queue_.front());
          queue_.pop_front();
        }
        task();
      }
    });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> g(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::submit(std::function<void()> task) {
  {
    std::lock_guard<std::mutex> g(mu_);
    if (stopping_) throw Error("SHUTDOWN", "worker pool is stopping");
    queue_.push_back(std::move(task));
  }
  cv_.notify_one();
}

optim::ProgressFn progress_bridge(Reporter* reporter, double from) {
  if (!reporter) return {};
  const double mid = from + (1.0 - from) / 2.0;
  return [reporter, from, mid](const optim::Progress& p) {
    const double frac = p.iterations > 0 ? static_cast<double>(p.iteration) / p.iterations : 0.0;
    if (p.stage == "point")
      reporter->report(Stage::PointOpt, mid + frac * (0.999 - mid), p.loss.total);
    else if (p.stage == "latent")
      reporter->report(Stage::LatentOpt, from + frac * (mid - from), p.loss.total);
    else
      reporter->report(Stage::LatentOpt, from);
    return !reporter->cancelled();
  };
}

GenerationOutput run_generation(const std::string& prompt, const Services& services,
                                const GenerationSettings& settings, Reporter* reporter) {
  if (!services.transport) throw ConfigError("no LLM transport configured (set CHAT2SVG_LLM_ENDPOINT)");
  if (!services.enhancer) throw ConfigError("no enhancer configured (give a target image or an enhancer endpoint)");
  auto cancelled = [&] { return reporter && reporter->cancelled(); };
  auto check_cancel = [&] {
    if (cancelled()) throw Error("CANCELLED", "job cancelled");
  };

  GenerationOutput out;
  llm::PipelineConfig pc;
  pc.render = settings.template_render;
  pc.parallel_repeats = settings.parallel_repeats;
  const double steps = static_cast<double>(settings.repeats) * (settings.rounds + 1);
  pc.on_stage = [&](const std::string& stage, int repeat, int round) {
    if (!reporter) return;
    const Stage s = stage_from_name(stage).value_or(Stage::Expanding);
    reporter->report(s, kGenerationEnd * ((repeat - 1) * (settings.rounds + 1) + round) / steps);
  };
  llm::Pipeline pipeline(*services.transport, pc);
  out.candidates = pipeline.generate_candidates(prompt, settings.rounds, settings.repeats);
  check_cancel();
  out.selection = llm::select_best(out.candidates, services.scorer.get(), settings.template_render);
  out.templ = out.candidates.candidates.at(out.selection.index).parsed;

  if (reporter) reporter->report(Stage::Enhancing, kGenerationEnd);
  const enhance::EnhanceResult er = enhance::enhance_template(
      out.templ.doc, settings.optimization.render, *services.enhancer, services.segmenter.get(), settings.enhance);
  out.target = er.target;
  out.enhanced = er.doc;
  check_cancel();
  if (reporter) reporter->report(Stage::Enhancing, kEnhanceEnd);

  const shape::FourierDecoder fallback;
  const shape::ShapeDecoder& decoder = services.decoder ? *services.decoder : static_cast<const shape::ShapeDecoder&>(fallback);
  optim::PipelineOptions po;
  po.progress = progress_bridge(reporter, kEnhanceEnd);
  po.snapshot = settings.snapshot;
  po.snapshot_every = settings.snapshot_every;
  out.optimized = optim::optimize_document(out.enhanced, out.target, settings.optimization, decoder, po);
  check_cancel();
  out.trace = out.optimized.latent.loss_trace;
  out.trace.insert(out.trace.end(), out.optimized.point.loss_trace.begin(), out.optimized.point.loss_trace.end());
  return out;
}

session::TargetFn edit_target(const Services& services, const GenerationSettings& settings) {
  if (!services.enhancer) return {};
  auto enhancer = services.enhancer;
  const auto render = settings.optimization.render;
  const auto opt = settings.enhance;
  return [enhancer, render, opt](const svg::Document& doc) {
    const raster::RasterImage img = raster::render(doc, render);
    return enhance::request_enhancement(enhance::make_request(img, opt.strength, opt.blur_sigma), *enhancer,
                                        img.width, img.height);
  };
}

}  // namespace svgsmith::gateway
