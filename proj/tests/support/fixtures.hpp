#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mvee/region.hpp"
#include "mvee/version_graph.hpp"

namespace mvee::testing {

std::filesystem::path source_dir();
std::filesystem::path fixture_dir();
std::filesystem::path demo_dir();

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

MarkedRegion region_from_text(const std::string& text, const std::string& section, const std::string& build_id);
MarkedRegion load_region(const std::filesystem::path& path, const std::string& section, const std::string& build_id);

struct CorpusCase {
  std::string name;
  std::string category;
  std::string expected;  // Equivalent | Anomaly
  std::vector<std::string> categories;
  MarkedRegion a;
  MarkedRegion b;
};

std::string corpus_section();
std::vector<CorpusCase> load_corpus();

struct ReplayStep {
  std::string build_id;
  std::map<std::string, MethodResult> results;
};

struct Replay {
  VersionGraph graph;
  std::vector<ReplayStep> steps;
};

/// Records the five scripted builds of the version-graph walkthrough.
Replay replay_walkthrough();

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace mvee::testing
