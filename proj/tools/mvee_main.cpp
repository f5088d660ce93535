#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "mvee/api_server.hpp"
#include "mvee/project.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kAnomaly = 2;

mvee::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvee: multi-version experiment environment"};
  app.require_subcommand(1);

  std::string config = "mvee.json";
  std::string state_dir;
  app.add_option("--config", config, "Project configuration file")->capture_default_str();
  app.add_option("--state-dir", state_dir, "Override the state directory");

  auto* init = app.add_subcommand("init", "Create the state directory");
  auto* build = app.add_subcommand("build", "Compile, analyze the marked sections and update the version graph");
  auto* run = app.add_subcommand("run", "Run the experiment and store its results");
  auto* graph = app.add_subcommand("graph", "Print the version graph");
  bool json = false;
  build->add_flag("--json", json, "Print the build report as JSON");

  auto* report = app.add_subcommand("report", "Write the multi-version report");
  std::string metric;
  std::string param;
  report->add_option("--metric", metric, "Metric to plot")->required();
  report->add_option("--param", param, "Parameter on the x axis")->required();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API and web UI");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string ui_dir;
  serve->add_option("--port", port, "Port to listen on")->capture_default_str();
  serve->add_option("--host", host, "Address to bind")->capture_default_str();
  serve->add_option("--ui", ui_dir, "Directory with the web UI bundle");

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<std::filesystem::path> override_dir;
    if (!state_dir.empty()) override_dir = state_dir;
    auto project = mvee::Project::open(config, override_dir);

    if (*init) {
      project.init();
      std::cout << "initialized " << project.state_dir().string() << "\n";
    } else if (*build) {
      const auto r = project.build();
      std::cout << (json ? r.to_json().dump(2) + "\n" : r.summary());
      return r.has_anomaly() ? kAnomaly : kOk;
    } else if (*run) {
      std::cout << project.run().summary();
    } else if (*graph) {
      std::cout << project.graph_text();
    } else if (*report) {
      const auto files = project.report(metric, param);
      std::cout << "wrote " << files.svg.string() << "\n" << "wrote " << files.json.string() << "\n";
      if (files.mixed_svg) std::cout << "wrote " << files.mixed_svg->string() << "\n";
      if (files.single_svg) std::cout << "wrote " << files.single_svg->string() << "\n";
    } else if (*serve) {
      if (!project.initialized()) throw mvee::Error("project is not initialized; run `mvee init` first");
      std::optional<std::filesystem::path> ui;
      if (!ui_dir.empty()) ui = ui_dir;
      mvee::ApiServer server(project, ui);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving on http://" << host << ":" << bound << "/" << std::endl;
      server.listen();
      g_server = nullptr;
    }
  } catch (const mvee::ConfigError& e) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& d : e.diagnostics()) std::cerr << "  " << d << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kOk;
}
