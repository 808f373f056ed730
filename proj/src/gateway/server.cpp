#include <httplib.h>

#include <json.hpp>
#include <sstream>

#include "svgsmith/error.hpp"
#include "svgsmith/gateway.hpp"

namespace svgsmith::gateway {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(error_json(code, message), "application/json");
}

json ops_json(const session::EditOps& ops) {
  return {{"modified", ops.modified},
          {"removed", ops.removed},
          {"added", {{"start_path_id", ops.added.start_path_id}, {"ids", ops.added.ids}}}};
}

json event_json(const JobEvent& e) {
  json j = {{"seq", e.seq}, {"stage", stage_name(e.stage)}, {"progress", e.progress}, {"message", e.message}};
  j["loss"] = e.loss ? json(*e.loss) : json(nullptr);
  return j;
}

json job_json(const PipelineJob& job) {
  json j = {{"job_id", job.id()},
            {"session_id", job.session_id()},
            {"kind", job.kind()},
            {"stage", stage_name(job.stage())},
            {"progress", job.progress()},
            {"artifacts", job.artifacts()}};
  if (job.stage() == Stage::Failed) j["error"] = {{"error", job.error_code()}, {"message", job.error_message()}};
  return j;
}

// The body as a JSON object with a non-empty string field, or nullopt.
std::optional<std::string> string_field(const std::string& body, const char* field) {
  try {
    const json j = json::parse(body);
    if (!j.is_object() || !j.contains(field) || !j[field].is_string()) return std::nullopt;
    std::string v = j[field].get<std::string>();
    if (v.find_first_not_of(" \t\r\n") == std::string::npos) return std::nullopt;
    return v;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::string csv_of(const std::vector<optim::LossTerms>& trace) {
  std::ostringstream out;
  optim::write_trace_csv(out, trace);
  return out.str();
}

const char* content_type_for(const std::string& name) {
  if (name.ends_with(".png")) return "image/png";
  if (name.ends_with(".svg")) return "image/svg+xml";
  if (name.ends_with(".csv")) return "text/csv";
  if (name.ends_with(".json")) return "application/json";
  return "application/octet-stream";
}

}  // namespace

struct Server::Impl {
  ServerConfig cfg;
  session::SessionStore store;
  session::EditLocks locks;
  httplib::Server http;
  std::thread listener;

  mutable std::mutex mu;  // jobs, latest, prompts, store writes
  std::map<std::string, std::shared_ptr<PipelineJob>> jobs;
  std::map<std::string, std::string> latest;   // session -> newest job id
  std::map<std::string, std::string> pending;  // session -> prompt, until first save
  std::atomic<int> job_counter{0};

  // Declared last so queued work finishes before the members above go away.
  std::unique_ptr<WorkerPool> pool;

  explicit Impl(ServerConfig c) : cfg(std::move(c)), store(cfg.store) {
    pool = std::make_unique<WorkerPool>(cfg.workers);
    routes();
  }

  std::shared_ptr<PipelineJob> new_job(const std::string& session_id, const std::string& kind) {
    auto job = std::make_shared<PipelineJob>("job_" + session::new_session_id().substr(0, 8) + "_" +
                                                 std::to_string(++job_counter),
                                             session_id, kind);
    std::lock_guard<std::mutex> g(mu);
    jobs[job->id()] = job;
    latest[session_id] = job->id();
    return job;
  }

  std::shared_ptr<PipelineJob> find_job(const std::string& id) const {
    std::lock_guard<std::mutex> g(mu);
    const auto it = jobs.find(id);
    return it == jobs.end() ? nullptr : it->second;
  }

  std::shared_ptr<PipelineJob> latest_job(const std::string& session_id) const {
    std::lock_guard<std::mutex> g(mu);
    const auto it = latest.find(session_id);
    if (it == latest.end()) return nullptr;
    return jobs.at(it->second);
  }

  bool known(const std::string& id) const {
    try {
      if (store.exists(id)) return true;
    } catch (const ArgumentError&) {
      return false;
    }
    std::lock_guard<std::mutex> g(mu);
    return pending.count(id) > 0;
  }

  // Saves unless the job was cancelled (the session may have been deleted).
  bool save_if_live(const PipelineJob& job, const std::function<void()>& write) {
    std::lock_guard<std::mutex> g(mu);
    if (job.cancelled()) return false;
    write();
    return true;
  }

  void run_job(const std::shared_ptr<PipelineJob>& job, const std::function<void()>& body) {
    try {
      body();
      if (job->cancelled()) job->fail("CANCELLED", "job cancelled");
      else job->finish();
    } catch (const Error& e) {
      job->fail(e.code(), e.what());
    } catch (const std::exception& e) {
      job->fail("INTERNAL", e.what());
    }
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    const auto prompt = string_field(req.body, "prompt");
    if (!prompt) return send_error(res, 422, "INVALID_PAYLOAD", "expected a JSON object with a non-empty \"prompt\"");
    const std::string id = session::new_session_id();
    auto lease = std::make_shared<session::EditLocks::Lease>(locks.try_acquire(id));
    {
      std::lock_guard<std::mutex> g(mu);
      pending[id] = *prompt;
    }
    auto job = new_job(id, "generate");
    pool->submit([this, job, lease, id, p = *prompt] {
      run_job(job, [&] {
        const GenerationOutput out = run_generation(p, cfg.services, cfg.settings, job.get());
        if (job->cancelled()) return;
        session::EditSession s = session::new_session(id, p, out.optimized.doc);
        save_if_live(*job, [&] {
          store.save(s);
          job->set_artifact("scripting", store.put_asset(id, svg::serialize_template(out.templ), "svg"));
          job->set_artifact("enhancing", store.put_asset(id, raster::encode_png(out.target)));
          job->set_artifact("latent_opt", store.put_asset(id, svg::serialize(out.optimized.latent.doc), "svg"));
          job->set_artifact("point_opt", store.put_asset(id, svg::serialize(out.optimized.doc), "svg"));
          job->set_artifact("trace", store.put_asset(id, csv_of(out.trace), "csv"));
          pending.erase(id);
        });
      });
      lease->release();
    });
    send_json(res, 201, {{"session_id", id}, {"job_id", job->id()}});
  }

  void get_session(const std::string& id, httplib::Response& res) {
    if (!known(id)) return send_error(res, 404, "NOT_FOUND", "unknown session " + id);
    const auto job = latest_job(id);
    json j = {{"session_id", id}, {"busy", locks.busy(id)}};
    j["job_id"] = job ? json(job->id()) : json(nullptr);
    j["stage"] = job ? stage_name(job->stage()) : "done";
    j["progress"] = job ? job->progress() : 1.0;
    if (job && job->stage() == Stage::Failed)
      j["error"] = {{"error", job->error_code()}, {"message", job->error_message()}};
    if (store.exists(id)) {
      const auto s = store.load(id);
      j["prompt"] = s.prompt;
      j["path_count"] = s.current.paths.size();
      j["history_length"] = s.history.size();
      j["ready"] = true;
    } else {
      std::lock_guard<std::mutex> g(mu);
      j["prompt"] = pending.count(id) ? pending.at(id) : "";
      j["path_count"] = 0;
      j["history_length"] = 0;
      j["ready"] = false;
    }
    send_json(res, 200, j);
  }

  // Loads a saved session or answers 404 / 409 itself.
  std::optional<session::EditSession> ready_session(const std::string& id, httplib::Response& res) {
    if (!known(id)) {
      send_error(res, 404, "NOT_FOUND", "unknown session " + id);
      return std::nullopt;
    }
    if (!store.exists(id)) {
      const auto job = latest_job(id);
      if (job && job->stage() == Stage::Failed)
        send_error(res, 409, "GENERATION_FAILED", job->error_message());
      else
        send_error(res, 409, "NOT_READY", "session " + id + " is still being generated");
      return std::nullopt;
    }
    return store.load(id);
  }

  void post_edit(const std::string& id, const httplib::Request& req, httplib::Response& res) {
    if (!known(id)) return send_error(res, 404, "NOT_FOUND", "unknown session " + id);
    const auto instruction = string_field(req.body, "instruction");
    if (!instruction)
      return send_error(res, 422, "INVALID_PAYLOAD", "expected a JSON object with a non-empty \"instruction\"");
    auto lease = std::make_shared<session::EditLocks::Lease>(locks.try_acquire(id));
    if (!lease->owns()) return send_error(res, 409, "BUSY", "another job is running on session " + id);
    auto s = ready_session(id, res);
    if (!s) return;
    if (!cfg.services.transport) return send_error(res, 503, "CONFIG", "no LLM transport configured");

    session::EditResult edit;
    try {
      edit = session::apply_edit(*s, *cfg.services.transport, *instruction);
    } catch (const Error& e) {
      return send_error(res, 502, e.code(), e.what());
    }
    auto job = new_job(id, "edit");
    const json body = {{"job_id", job->id()}, {"ops", ops_json(edit.ops)}, {"warnings", edit.warnings}};
    auto shared_session = std::make_shared<session::EditSession>(std::move(*s));
    auto shared_edit = std::make_shared<session::EditResult>(std::move(edit));
    pool->submit([this, job, lease, shared_session, shared_edit, id, ins = *instruction] {
      run_job(job, [&] {
        job->report(Stage::Enhancing, 0.05);
        const shape::FourierDecoder fallback;
        const shape::ShapeDecoder& decoder = cfg.services.decoder ? *cfg.services.decoder : static_cast<const shape::ShapeDecoder&>(fallback);
        const auto run = session::complete_edit(*shared_session, ins, *shared_edit,
                                                edit_target(cfg.services, cfg.settings), cfg.settings.optimization,
                                                decoder, progress_bridge(job.get(), 0.1));
        if (run.optimized.cancelled) return;
        save_if_live(*job, [&] {
          if (!run.target_png.empty()) job->set_artifact("enhancing", store.put_asset(id, run.target_png));
          store.save(*shared_session);
          job->set_artifact("point_opt", store.put_asset(id, svg::serialize(shared_session->current), "svg"));
        });
      });
      lease->release();
    });
    send_json(res, 202, body);
  }

  void get_svg(const std::string& id, httplib::Response& res) {
    const auto s = ready_session(id, res);
    if (!s) return;
    res.status = 200;
    res.set_content(svg::serialize(s->current), "image/svg+xml");
  }

  void get_paths(const std::string& id, httplib::Response& res) {
    const auto s = ready_session(id, res);
    if (!s) return;
    json paths = json::array();
    for (const auto& p : s->current.paths) paths.push_back({{"id", p.id}, {"semantic_label", p.semantic_label}});
    send_json(res, 200, {{"session_id", id}, {"paths", paths}});
  }

  void get_asset(const std::string& id, const std::string& name, httplib::Response& res) {
    if (!known(id)) return send_error(res, 404, "NOT_FOUND", "unknown session " + id);
    try {
      res.set_content(store.asset(id, name), content_type_for(name));
      res.status = 200;
    } catch (const Error&) {
      send_error(res, 404, "NOT_FOUND", "unknown asset " + name);
    }
  }

  void delete_session(const std::string& id, httplib::Response& res) {
    if (!known(id)) return send_error(res, 404, "NOT_FOUND", "unknown session " + id);
    std::lock_guard<std::mutex> g(mu);
    for (auto& [_, job] : jobs)
      if (job->session_id() == id) job->cancel();
    pending.erase(id);
    store.remove(id);
    res.status = 204;
  }

  void stream_events(const std::string& job_id, httplib::Response& res) {
    const auto job = find_job(job_id);
    if (!job) return send_error(res, 404, "NOT_FOUND", "unknown job " + job_id);
    res.set_header("Cache-Control", "no-cache");
    auto last = std::make_shared<int>(0);
    res.set_chunked_content_provider("text/event-stream", [job, last](std::size_t, httplib::DataSink& sink) {
      const auto events = job->events_after(*last, std::chrono::milliseconds(1000));
      for (const auto& e : events) {
        const std::string chunk =
            "id: " + std::to_string(e.seq) + "\nevent: progress\ndata: " + event_json(e).dump() + "\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
        *last = e.seq;
      }
      if (events.empty()) {
        if (job->terminal() && job->events_after(*last, std::chrono::milliseconds(0)).empty()) {
          sink.done();
          return true;
        }
        static const std::string ping = ": keep-alive\n\n";
        if (!sink.write(ping.data(), ping.size())) return false;
      }
      return true;
    });
  }

  void routes() {
    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) { create_session(req, res); });
    http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      get_session(req.matches[1], res);
    });
    http.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      delete_session(req.matches[1], res);
    });
    http.Post(R"(/sessions/([^/]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
      post_edit(req.matches[1], req, res);
    });
    http.Get(R"(/sessions/([^/]+)/svg)", [this](const httplib::Request& req, httplib::Response& res) {
      get_svg(req.matches[1], res);
    });
    http.Get(R"(/sessions/([^/]+)/paths)", [this](const httplib::Request& req, httplib::Response& res) {
      get_paths(req.matches[1], res);
    });
    http.Get(R"(/sessions/([^/]+)/assets/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      get_asset(req.matches[1], req.matches[2], res);
    });
    http.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto job = find_job(req.matches[1]);
      if (!job) return send_error(res, 404, "NOT_FOUND", "unknown job " + std::string(req.matches[1]));
      send_json(res, 200, job_json(*job));
    });
    http.Get(R"(/jobs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      stream_events(req.matches[1], res);
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        const std::string code = res.status == 404 ? "NOT_FOUND" : "HTTP_" + std::to_string(res.status);
        res.set_content(error_json(code, "no such resource"), "application/json");
      }
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, 500, e.code(), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "INTERNAL", e.what());
      }
    });
  }
};

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Server::~Server() {
  stop();
  std::lock_guard<std::mutex> g(impl_->mu);
  for (auto& [_, job] : impl_->jobs) job->cancel();
}

int Server::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void Server::run(const std::string& host, int port) {
  if (!impl_->http.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

std::shared_ptr<PipelineJob> Server::job(const std::string& id) const { return impl_->find_job(id); }

}  // namespace svgsmith::gateway
