#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvee/equivalence.hpp"
#include "mvee/region.hpp"
#include "mvee/result_store.hpp"
#include "mvee/version_graph.hpp"

namespace mvee {

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  /// One `field: message` entry per problem.
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class RunError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

struct SectionConfig {
  std::string id;
  std::vector<std::filesystem::path> source_files;
};

/// Contents of `mvee.json`. Relative paths resolve against `root`.
struct ProjectConfig {
  std::filesystem::path root;
  std::string build_command;
  std::filesystem::path asm_output;
  std::string run_command;
  std::filesystem::path results_output = "mvee-results.json";
  std::vector<SectionConfig> sections;
  std::filesystem::path state_dir = "mvee";
  MarkerConvention markers;

  std::vector<std::string> section_ids() const;

  static ProjectConfig parse(const nlohmann::json& j, const std::filesystem::path& root);
  static ProjectConfig load(const std::filesystem::path& config_file);
};

/// Source digest per section at the last build.
struct SourceState {
  std::map<std::string, std::string> digests;

  nlohmann::json to_json() const;
  static SourceState from_json(const nlohmann::json& j);
  bool operator==(const SourceState&) const = default;
};

/// Pipeline stages, numbered as in the workflow they implement.
enum class PipelineStep {
  Compile = 2,
  StoreAssembly = 3,
  Analyze = 4,
  Inspect = 5,
  Run = 7,
  UpdateGraph = 8,
  Report = 9,
};

std::string_view to_string(PipelineStep step);

struct SectionBuildResult {
  bool source_modified = false;
  StepOutcome outcome;
  std::optional<Verdict> verdict;
};

struct BuildReport {
  std::string build_id;
  std::map<std::string, SectionBuildResult> sections;
  std::vector<std::string> anomalies;  // sections that forked
  std::vector<std::string> warnings;

  bool has_anomaly() const { return !anomalies.empty(); }
  std::string summary() const;
  nlohmann::json to_json() const;
};

struct RunReport {
  std::string build_id;
  std::size_t ingested = 0;
  std::size_t total_records = 0;

  std::string summary() const;
  nlohmann::json to_json() const;
};

struct ReportFiles {
  std::filesystem::path svg;
  std::filesystem::path json;
  std::optional<std::filesystem::path> mixed_svg;
  std::optional<std::filesystem::path> single_svg;
  Chart chart;
};

class Project {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds since the epoch
  using StepObserver = std::function<void(PipelineStep)>;

  explicit Project(ProjectConfig config, std::optional<std::filesystem::path> state_dir_override = std::nullopt);
  static Project open(const std::filesystem::path& config_file,
                      std::optional<std::filesystem::path> state_dir_override = std::nullopt);

  const ProjectConfig& config() const { return config_; }
  const std::filesystem::path& state_dir() const { return state_dir_; }
  std::filesystem::path graph_path() const { return state_dir_ / "graph.json"; }
  std::filesystem::path results_path() const { return state_dir_ / "results.jsonl"; }
  std::filesystem::path source_state_path() const { return state_dir_ / "source-state.json"; }
  std::filesystem::path asm_dir() const { return state_dir_ / "asm"; }
  std::filesystem::path report_dir() const { return state_dir_ / "report"; }
  bool initialized() const;

  void set_clock(Clock clock) { clock_ = std::move(clock); }
  void set_step_observer(StepObserver observer) { observer_ = std::move(observer); }

  void init();
  BuildReport build();
  RunReport run();
  ReportFiles report(const std::string& metric, const std::string& param);
  std::string graph_text() const;

  VersionGraph load_graph() const;
  ResultStore load_results() const;
  SourceState load_source_state() const;
  void save_graph(const VersionGraph& graph) const;
  void save_results(const ResultStore& db) const;
  void save_source_state(const SourceState& state) const;
  SourceState current_source_state() const;

  /// Builds with per-section outcomes, oldest first.
  nlohmann::json builds_json() const;
  /// Verdict of a forked section plus both regions with per-line edit categories.
  nlohmann::json anomaly_json(const std::string& build_id, const std::string& section) const;
  nlohmann::json results_json(const std::string& metric, const std::string& param) const;

 private:
  std::string next_build_id(const VersionGraph& graph) const;
  void notify(PipelineStep step) const;
  int shell(const std::string& command, const std::filesystem::path& log) const;

  ProjectConfig config_;
  std::filesystem::path state_dir_;
  Clock clock_;
  StepObserver observer_;
};

/// `YYYYMMDDTHHMMSS.mmmZ` for a UTC instant.
std::string format_build_id(std::int64_t epoch_ms);
std::optional<std::int64_t> parse_build_id(std::string_view id);

}  // namespace mvee
