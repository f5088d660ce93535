#include "mvee/api_server.hpp"

#include <httplib.h>

#include <mutex>

namespace mvee {

namespace {

constexpr const char* kJson = "application/json";

constexpr const char* kPlaceholder = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>mvee</title></head>
<body>
<h1>mvee</h1>
<p>The web UI bundle is not installed. The JSON API is available:</p>
<ul>
<li><a href="/api/graph">/api/graph</a></li>
<li><a href="/api/builds">/api/builds</a></li>
<li>/api/anomaly/{build}/{section}</li>
<li>/api/results?metric=&amp;param=</li>
<li>/api/report?metric=&amp;param=</li>
<li>POST /api/build, POST /api/run</li>
</ul>
</body></html>
)";

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail) {
  send_json(res, {{"error", error}, {"detail", detail}}, status);
}

std::string required_query(const httplib::Request& req, const char* name) {
  if (!req.has_param(name) || req.get_param_value(name).empty()) {
    throw std::invalid_argument(std::string("missing query parameter '") + name + "'");
  }
  return req.get_param_value(name);
}

// Maps the exception in flight to an HTTP status and error name.
void send_current_exception(httplib::Response& res, std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const NotFoundError& e) {
    send_error(res, 404, "NotFound", e.what());
  } catch (const ReportError& e) {
    send_error(res, 404, "EmptySelection", e.what());
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, "BadRequest", e.what());
  } catch (const ConfigError& e) {
    send_error(res, 400, "ConfigError", e.what());
  } catch (const BuildError& e) {
    send_error(res, 500, "BuildError", e.what());
  } catch (const RunError& e) {
    send_error(res, 500, "RunError", e.what());
  } catch (const PersistError& e) {
    send_error(res, 500, "PersistError", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "Error", e.what());
  } catch (...) {
    send_error(res, 500, "Error", "unknown failure");
  }
}

}  // namespace

struct ApiServer::Impl {
  Project& project;
  httplib::Server server;
  std::mutex mutation;

  explicit Impl(Project& p) : project(p) {}

  template <typename F>
  void mutate(httplib::Response& res, F&& op) {
    std::unique_lock lock(mutation, std::try_to_lock);
    if (!lock.owns_lock()) {
      send_error(res, 409, "Busy", "a build or run is already in progress");
      return;
    }
    send_json(res, op());
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      send_current_exception(res, ep);
    });

    server.Get("/api/graph", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, project.load_graph().to_json());
    });
    server.Get("/api/builds", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, project.builds_json());
    });
    server.Get("/api/anomaly/:build/:section", [this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, project.anomaly_json(req.path_params.at("build"), req.path_params.at("section")));
    });
    server.Get("/api/results", [this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, project.results_json(req.get_param_value("metric"), req.get_param_value("param")));
    });
    server.Get("/api/report", [this](const httplib::Request& req, httplib::Response& res) {
      const auto metric = required_query(req, "metric");
      const auto param = required_query(req, "param");
      const auto graph = project.load_graph();
      const auto db = project.load_results();
      const auto chart = export_report(db, graph, metric, param);
      nlohmann::json body{{"chart", chart.to_json()}, {"svg", chart.svg()}};
      try {
        const auto modes = demo_problem_modes(db, graph, metric, param);
        body["mixed"] = {{"chart", modes.mixed.to_json()}, {"svg", modes.mixed.svg()}};
        body["single"] = {{"chart", modes.single.to_json()}, {"svg", modes.single.svg()}};
      } catch (const ReportError&) {
        // The contrast charts are optional.
      }
      send_json(res, body);
    });
    server.Post("/api/build", [this](const httplib::Request&, httplib::Response& res) {
      mutate(res, [this] { return project.build().to_json(); });
    });
    server.Post("/api/run", [this](const httplib::Request&, httplib::Response& res) {
      mutate(res, [this] { return project.run().to_json(); });
    });
  }
};

ApiServer::ApiServer(Project& project, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(project)) {
  impl_->routes();
  if (static_dir && std::filesystem::is_directory(*static_dir)) {
    impl_->server.set_mount_point("/", static_dir->string());
  } else {
    impl_->server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholder, "text/html; charset=utf-8");
    });
  }
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind to " + host + ":" + std::to_string(port));
  return port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() { impl_->server.stop(); }

void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace mvee
