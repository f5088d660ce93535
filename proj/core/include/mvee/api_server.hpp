#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "mvee/project.hpp"

namespace mvee {

/// Local HTTP front end over a Project. Reads run concurrently; build and run
/// are serialized and a second mutation while one is in flight gets 409.
class ApiServer {
 public:
  /// `static_dir` holds the web UI bundle served at `/`. Without it a
  /// placeholder page is served.
  explicit ApiServer(Project& project, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds to `host:port` (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mvee
