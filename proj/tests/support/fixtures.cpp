#include "fixtures.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mvee::testing {

namespace fs = std::filesystem;

fs::path source_dir() { return MVEE_SOURCE_DIR; }
fs::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }
fs::path demo_dir() { return source_dir() / "demo"; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

MarkedRegion region_from_text(const std::string& text, const std::string& section, const std::string& build_id) {
  return extract_region(parse_asm_file(text, build_id), section);
}

MarkedRegion load_region(const fs::path& path, const std::string& section, const std::string& build_id) {
  return region_from_text(read_text(path), section, build_id);
}

std::string corpus_section() {
  return nlohmann::json::parse(read_text(fixture_dir() / "corpus" / "manifest.json")).at("section");
}

std::vector<CorpusCase> load_corpus() {
  const auto dir = fixture_dir() / "corpus";
  const auto manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  const std::string section = manifest.at("section");
  std::vector<CorpusCase> out;
  for (const auto& c : manifest.at("cases")) {
    CorpusCase cc;
    cc.name = c.at("name");
    cc.category = c.at("category");
    cc.expected = c.at("expected");
    cc.categories = c.at("categories").get<std::vector<std::string>>();
    cc.a = load_region(dir / (cc.name + ".a.s"), section, "a");
    cc.b = load_region(dir / (cc.name + ".b.s"), section, "b");
    out.push_back(std::move(cc));
  }
  return out;
}

Replay replay_walkthrough() {
  const auto dir = fixture_dir() / "walkthrough";
  const auto scenario = nlohmann::json::parse(read_text(dir / "scenario.json"));
  const auto sections = scenario.at("sections").get<std::vector<std::string>>();
  Replay replay;
  replay.graph.configure(sections);
  for (const auto& step : scenario.at("steps")) {
    const std::string build = step.at("build");
    const auto file = parse_asm_file(read_text(dir / step.at("file").get<std::string>()), build);
    const auto modified = step.at("modified").get<std::vector<std::string>>();
    std::map<std::string, MethodInput> inputs;
    for (const auto& s : sections) {
      MethodInput in;
      in.region = extract_region(file, s);
      in.source_modified = std::find(modified.begin(), modified.end(), s) != modified.end();
      inputs.emplace(s, std::move(in));
    }
    replay.steps.push_back({build, replay.graph.record_build(build, inputs)});
  }
  return replay;
}

TempDir::TempDir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 16; ++attempt) {
    auto candidate = fs::temp_directory_path() / ("mvee-test-" + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace mvee::testing
