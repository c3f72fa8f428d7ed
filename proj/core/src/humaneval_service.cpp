#include "fidelity/humaneval_service.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fidelity/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace fidelity::humaneval {

using nlohmann::ordered_json;

struct Service::Impl {
  Study study;
  JudgmentStore& store;
  ServiceConfig config;
  httplib::Server server;

  Impl(Study s, JudgmentStore& st, ServiceConfig c) : study(std::move(s)), store(st), config(std::move(c)) {}

  static void send(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void error(httplib::Response& res, int status, const std::string& message) {
    send(res, status, {{"error", message}});
  }

  // Returns false (and fills the response) when the annotator is missing or unknown.
  bool annotator(const httplib::Request& req, httplib::Response& res, std::string& out) const {
    if (!req.has_param("annotator")) {
      error(res, 400, "annotator query parameter is required");
      return false;
    }
    out = req.get_param_value("annotator");
    if (!study.has_annotator(out)) {
      error(res, 404, "unknown annotator");
      return false;
    }
    return true;
  }

  void routes() {
    server.Get("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      std::string who;
      if (!annotator(req, res, who)) return;
      const auto snap = store.snapshot();
      std::unordered_set<std::string> done;
      for (const auto& j : *snap)
        if (j.annotator_id == who) done.insert(j.item_id);
      ordered_json next = nullptr;
      for (const auto& it : study.items)
        if (!done.count(it.item_id)) {
          next = it.item_id;
          break;
        }
      send(res, 200, {{"total", study.items.size()}, {"completed", done.size()}, {"next_item", next}});
    });

    server.Get(R"(/api/item/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::string who;
      if (!annotator(req, res, who)) return;
      const auto* item = study.find(req.matches[1].str());
      if (!item) return error(res, 404, "unknown item");
      const auto view = blind_pair(study, *item, who);
      send(res, 200,
           {{"item_id", view.item_id},
            {"source_en", view.source_en},
            {"text_A", view.text_a},
            {"text_B", view.text_b},
            {"fluency_scale", {1, 2, 3, 4, 5}}});
    });

    server.Post("/api/judgment", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto j = Judgment::from_json(req.body);
        if (!study.has_annotator(j.annotator_id)) return error(res, 404, "unknown annotator");
        if (!study.find(j.item_id)) return error(res, 404, "unknown item");
        store.record(j);
        send(res, 201, {{"status", "recorded"}, {"item_id", j.item_id}});
      } catch (const ConflictError& e) {
        error(res, 409, e.what());
      } catch (const ValidationError& e) {
        error(res, 400, e.what());
      }
    });

    server.Get("/api/results", [this](const httplib::Request&, httplib::Response& res) {
      const auto snap = store.snapshot();
      if (!config.allow_partial && !study_complete(study, *snap))
        return error(res, 409, "study incomplete; start the service with partial results allowed to view them");
      const auto summary = aggregate(study, *snap);
      res.status = 200;
      res.set_content(summary_json(summary), "application/json");
    });

    if (config.static_dir) {
      if (!server.set_mount_point("/", config.static_dir->string()))
        throw ValidationError("static directory not found: " + config.static_dir->string());
    }
  }
};

Service::Service(Study study, JudgmentStore& store, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(study), store, std::move(config))) {
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  const auto& c = impl_->config;
  const int port = c.port == 0 ? s.bind_to_any_port(c.host) : (s.bind_to_port(c.host, c.port) ? c.port : -1);
  if (port < 0) throw ValidationError(fmt::format("cannot bind {}:{}", c.host, c.port));
  spdlog::info("human evaluation service listening on http://{}:{}", c.host, port);
  return port;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace fidelity::humaneval
