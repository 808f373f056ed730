#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "svgsmith/enhance.hpp"
#include "svgsmith/llm.hpp"
#include "svgsmith/optim.hpp"
#include "svgsmith/session.hpp"
#include "svgsmith/shape_prior.hpp"

namespace svgsmith::gateway {

enum class Stage { Expanding, Scripting, Rectifying, Enhancing, LatentOpt, PointOpt, Done, Failed };

std::string_view stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);

struct JobEvent {
  int seq = 0;
  Stage stage = Stage::Expanding;
  double progress = 0.0;
  std::optional<double> loss;
  std::string message;
};

/// Progress sink for long runs; the CLI and the service both drive it.
class Reporter {
 public:
  virtual ~Reporter() = default;
  virtual void report(Stage stage, double progress, std::optional<double> loss = std::nullopt,
                      const std::string& message = {}) = 0;
  virtual bool cancelled() const { return false; }
};

/// A background job. Stage and progress only move forward; done and failed
/// are terminal.
class PipelineJob final : public Reporter {
 public:
  PipelineJob(std::string job_id, std::string session_id, std::string kind);

  void report(Stage stage, double progress, std::optional<double> loss = std::nullopt,
              const std::string& message = {}) override;
  bool cancelled() const override { return cancel_.load(); }
  void cancel() { cancel_.store(true); }
  void finish(const std::string& message = {});
  void fail(const std::string& code, const std::string& message);
  void set_artifact(const std::string& stage, const std::string& ref);

  const std::string& id() const { return id_; }
  const std::string& session_id() const { return session_id_; }
  const std::string& kind() const { return kind_; }
  Stage stage() const;
  double progress() const;
  bool terminal() const;
  std::map<std::string, std::string> artifacts() const;
  std::string error_code() const;
  std::string error_message() const;
  /// Events with seq > after, waiting up to `wait` for at least one.
  std::vector<JobEvent> events_after(int after, std::chrono::milliseconds wait) const;

 private:
  void push(Stage stage, double progress, std::optional<double> loss, const std::string& message);

  std::string id_, session_id_, kind_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  Stage stage_ = Stage::Expanding;
  double progress_ = 0.0;
  std::vector<JobEvent> events_;
  std::map<std::string, std::string> artifacts_;
  std::string error_code_, error_message_;
  std::atomic<bool> cancel_{false};
};

/// Fixed number of threads draining a FIFO queue; the destructor finishes
/// queued work before joining.
class WorkerPool {
 public:
  explicit WorkerPool(int threads);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;
  void submit(std::function<void()> task);

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::thread> threads_;
  bool stopping_ = false;
};

struct Services {
  std::shared_ptr<llm::ChatTransport> transport;
  std::shared_ptr<enhance::Enhancer> enhancer;
  std::shared_ptr<enhance::Segmenter> segmenter;  ///< optional: no detail paths without it
  std::shared_ptr<llm::Scorer> scorer;            ///< optional: fallback selection without it
  std::shared_ptr<shape::ShapeDecoder> decoder;
};

struct GenerationSettings {
  int rounds = 2;
  int repeats = 5;
  int parallel_repeats = 1;
  raster::RenderConfig template_render{2, 1.0, {1, 1, 1}, 512, 0, 16};  ///< rectification and scoring
  optim::OptimizationConfig optimization;  ///< its render also sets the target resolution
  enhance::EnhanceOptions enhance;
  optim::SnapshotFn snapshot;  ///< called every `snapshot_every` optimizer iterations
  int snapshot_every = 0;
};

struct GenerationOutput {
  llm::CandidateSet candidates;
  llm::Selection selection;
  svg::ParsedSvg templ;
  raster::RasterImage target;
  svg::Document enhanced;  ///< template plus detail paths
  optim::PipelineResult optimized;
  std::vector<optim::LossTerms> trace;  ///< latent then point stage
};

/// Candidates, selection, enhancement and both optimization stages.
GenerationOutput run_generation(const std::string& prompt, const Services& services,
                                const GenerationSettings& settings, Reporter* reporter = nullptr);

/// Maps optimizer progress onto job stages: inversion and latent -> latent_opt,
/// point -> point_opt, spanning [from, 1).
optim::ProgressFn progress_bridge(Reporter* reporter, double from);

/// Target for an edited document: render it and pass it through the enhancer.
session::TargetFn edit_target(const Services& services, const GenerationSettings& settings);

struct ServerConfig {
  std::filesystem::path store;
  int workers = 2;
  Services services;
  GenerationSettings settings;
};

/// The HTTP API over a session store. Requests are handled concurrently;
/// generation and edit optimization run on the worker pool.
class Server {
 public:
  explicit Server(ServerConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  std::shared_ptr<PipelineJob> job(const std::string& id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Machine-readable error body: {"error": code, "message": text}.
std::string error_json(const std::string& code, const std::string& message);

}  // namespace svgsmith::gateway
