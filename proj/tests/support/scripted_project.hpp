#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "mvee/project.hpp"

namespace mvee::testing {

/// Project whose build copies a staged `.s` file and whose run copies a
/// staged results document, so the pipeline runs without a compiler.
class ScriptedProject {
 public:
  explicit ScriptedProject(std::vector<std::string> sections = {"M", "B0", "B1"});

  const std::filesystem::path& root() const { return dir_.path(); }
  std::filesystem::path config_path() const { return root() / "mvee.json"; }
  nlohmann::json& config() { return config_; }
  void write_config() const;

  void stage_asm(const std::filesystem::path& fixture) const;
  void stage_results(const nlohmann::json& results) const;
  void stage_results_text(const std::string& text) const;
  void edit_source(const std::string& section, const std::string& content) const;
  std::filesystem::path source_file(const std::string& section) const;

  /// Fresh handle on the project with a clock that advances one second per call.
  Project open() const;

 private:
  TempDir dir_;
  nlohmann::json config_;
};

/// Runs the five scripted builds of the version-graph walkthrough through a
/// scripted project.
void replay_walkthrough_builds(const ScriptedProject& p);

}  // namespace mvee::testing
