#include "mvee/project.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>

#include "atomic_file.hpp"
#include "digest.hpp"

namespace mvee {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string tail_lines(const fs::path& path, std::size_t n) {
  if (!fs::exists(path)) return {};
  const auto text = detail::read_file(path);
  std::size_t pos = text.size();
  for (std::size_t lines = 0; pos > 0 && lines <= n;) {
    --pos;
    if (text[pos] == '\n') ++lines;
  }
  return text.substr(pos == 0 ? 0 : pos + 1);
}

nlohmann::json load_json_file(const fs::path& path) {
  return nlohmann::json::parse(detail::read_file(path));
}

void write_json_file(const fs::path& path, const nlohmann::json& j) { detail::write_file_atomic(path, j.dump(2) + "\n"); }

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
  return out.empty() ? "_" : out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : Error("invalid project configuration: " + join(diagnostics, "; ")), diagnostics_(std::move(diagnostics)) {}

std::vector<std::string> ProjectConfig::section_ids() const {
  std::vector<std::string> out;
  for (const auto& s : sections) out.push_back(s.id);
  return out;
}

ProjectConfig ProjectConfig::parse(const nlohmann::json& j, const fs::path& root) {
  std::vector<std::string> diag;
  ProjectConfig c;
  c.root = root;
  if (!j.is_object()) throw ConfigError({"$: expected a JSON object"});

  static const std::set<std::string> known = {"build_command", "asm_output", "run_command",    "results_output",
                                              "sections",      "state_dir",  "marker_prefixes"};
  for (const auto& [key, _] : j.items()) {
    if (known.count(key) == 0) diag.push_back(key + ": unknown field");
  }

  auto string_field = [&](const char* key, bool required) -> std::optional<std::string> {
    if (!j.contains(key)) {
      if (required) diag.push_back(std::string(key) + ": required");
      return std::nullopt;
    }
    if (!j.at(key).is_string()) {
      diag.push_back(std::string(key) + ": expected a string");
      return std::nullopt;
    }
    auto v = j.at(key).get<std::string>();
    if (v.empty()) {
      diag.push_back(std::string(key) + ": must not be empty");
      return std::nullopt;
    }
    return v;
  };

  if (auto v = string_field("build_command", true)) c.build_command = *v;
  if (auto v = string_field("run_command", true)) c.run_command = *v;
  if (auto v = string_field("asm_output", true)) c.asm_output = *v;
  if (auto v = string_field("results_output", false)) c.results_output = *v;
  if (auto v = string_field("state_dir", false)) c.state_dir = *v;

  if (j.contains("marker_prefixes")) {
    const auto& m = j.at("marker_prefixes");
    if (!m.is_object()) {
      diag.push_back("marker_prefixes: expected an object");
    } else {
      for (const auto& [key, value] : m.items()) {
        if (key != "begin" && key != "end") {
          diag.push_back("marker_prefixes." + key + ": unknown field");
        } else if (!value.is_string() || value.get<std::string>().empty()) {
          diag.push_back("marker_prefixes." + key + ": expected a non-empty string");
        } else {
          (key == "begin" ? c.markers.begin_prefix : c.markers.end_prefix) = value.get<std::string>();
        }
      }
      if (c.markers.begin_prefix == c.markers.end_prefix) diag.push_back("marker_prefixes: begin and end must differ");
    }
  }

  if (!j.contains("sections")) {
    diag.push_back("sections: required");
  } else if (!j.at("sections").is_array() || j.at("sections").empty()) {
    diag.push_back("sections: expected a non-empty array");
  } else {
    std::set<std::string> seen;
    const auto& arr = j.at("sections");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string at = "sections[" + std::to_string(i) + "]";
      const auto& s = arr[i];
      if (!s.is_object()) {
        diag.push_back(at + ": expected an object");
        continue;
      }
      SectionConfig sc;
      if (!s.contains("id") || !s.at("id").is_string() || s.at("id").get<std::string>().empty()) {
        diag.push_back(at + ".id: expected a non-empty string");
      } else {
        sc.id = s.at("id").get<std::string>();
        if (!seen.insert(sc.id).second) diag.push_back(at + ".id: duplicate section id '" + sc.id + "'");
      }
      if (s.contains("source_files")) {
        const auto& files = s.at("source_files");
        if (!files.is_array()) {
          diag.push_back(at + ".source_files: expected an array of paths");
        } else {
          for (std::size_t k = 0; k < files.size(); ++k) {
            if (!files[k].is_string()) {
              diag.push_back(at + ".source_files[" + std::to_string(k) + "]: expected a string");
            } else {
              sc.source_files.emplace_back(files[k].get<std::string>());
            }
          }
        }
      }
      for (const auto& [key, _] : s.items()) {
        if (key != "id" && key != "source_files") diag.push_back(at + "." + key + ": unknown field");
      }
      c.sections.push_back(std::move(sc));
    }
  }

  if (!diag.empty()) throw ConfigError(std::move(diag));
  return c;
}

ProjectConfig ProjectConfig::load(const fs::path& config_file) {
  if (!fs::exists(config_file)) throw ConfigError({config_file.string() + ": file not found"});
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(config_file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({config_file.string() + ": " + e.what()});
  }
  return parse(j, fs::absolute(config_file).parent_path());
}

nlohmann::json SourceState::to_json() const { return {{"schema", 1}, {"sections", digests}}; }

SourceState SourceState::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema") != 1) throw PersistError("unsupported source-state schema");
    return SourceState{j.at("sections").get<std::map<std::string, std::string>>()};
  } catch (const PersistError&) {
    throw;
  } catch (const std::exception& e) {
    throw PersistError(std::string("malformed source state: ") + e.what());
  }
}

std::string_view to_string(PipelineStep step) {
  switch (step) {
    case PipelineStep::Compile: return "compile";
    case PipelineStep::StoreAssembly: return "store-assembly";
    case PipelineStep::Analyze: return "analyze";
    case PipelineStep::Inspect: return "inspect";
    case PipelineStep::Run: return "run";
    case PipelineStep::UpdateGraph: return "update-graph";
    case PipelineStep::Report: return "report";
  }
  return "?";
}

std::string format_build_id(std::int64_t epoch_ms) {
  const std::time_t secs = static_cast<std::time_t>(epoch_ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d%02d%02dT%02d%02d%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(epoch_ms % 1000));
  return buf;
}

std::optional<std::int64_t> parse_build_id(std::string_view id) {
  if (id.size() != 20) return std::nullopt;
  std::tm tm{};
  int ms = 0;
  char z = 0;
  const std::string s(id);
  if (std::sscanf(s.c_str(), "%4d%2d%2dT%2d%2d%2d.%3d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &ms, &z) != 8 ||
      z != 'Z') {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<std::int64_t>(timegm(&tm)) * 1000 + ms;
}

std::string BuildReport::summary() const {
  std::ostringstream out;
  out << "build " << build_id << "\n";
  for (const auto& [id, s] : sections) {
    out << "  " << id << ": " << to_string(s.outcome.kind) << " " << VersionId{id, s.outcome.version}.label();
    if (s.outcome.from) out << " (anomaly against " << VersionId{id, *s.outcome.from}.label() << ")";
    if (s.source_modified) out << " [source modified]";
    out << "\n";
    if (s.outcome.kind != OutcomeKind::Fork || !s.verdict) continue;
    for (const auto& e : s.verdict->classified_edits) {
      if (!e.violating) continue;
      out << "      " << to_string(e.category) << ": " << e.detail;
      auto lines = [](const std::vector<std::size_t>& ls) {
        std::string r;
        for (auto l : ls) r += (r.empty() ? "" : ",") + std::to_string(l);
        return r.empty() ? std::string("-") : r;
      };
      out << "  [" << s.verdict->source_build_id << ".s:" << lines(e.source_lines) << " -> " << build_id
          << ".s:" << lines(e.target_lines) << "]\n";
    }
  }
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  if (anomalies.empty()) {
    out << "no anomalies\n";
  } else {
    out << "anomalies: " << join(anomalies, ", ") << "\n";
  }
  return out.str();
}

nlohmann::json BuildReport::to_json() const {
  nlohmann::json secs = nlohmann::json::object();
  for (const auto& [id, s] : sections) {
    nlohmann::json j{{"outcome", to_string(s.outcome.kind)},
                     {"version", VersionId{id, s.outcome.version}.label()},
                     {"sourceModified", s.source_modified}};
    if (s.outcome.from) j["from"] = VersionId{id, *s.outcome.from}.label();
    if (s.verdict) j["verdict"] = mvee::to_json(*s.verdict);
    secs[id] = std::move(j);
  }
  return {{"build", build_id}, {"sections", std::move(secs)}, {"anomalies", anomalies}, {"warnings", warnings}};
}

std::string RunReport::summary() const {
  return "run for build " + build_id + ": ingested " + std::to_string(ingested) + " results (" +
         std::to_string(total_records) + " stored)\n";
}

nlohmann::json RunReport::to_json() const {
  return {{"build", build_id}, {"ingested", ingested}, {"totalRecords", total_records}};
}

Project::Project(ProjectConfig config, std::optional<fs::path> state_dir_override) : config_(std::move(config)) {
  state_dir_ = state_dir_override ? fs::absolute(*state_dir_override) : config_.root / config_.state_dir;
  clock_ = [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

Project Project::open(const fs::path& config_file, std::optional<fs::path> state_dir_override) {
  return Project(ProjectConfig::load(config_file), std::move(state_dir_override));
}

bool Project::initialized() const { return fs::exists(graph_path()); }

void Project::notify(PipelineStep step) const {
  if (observer_) observer_(step);
}

int Project::shell(const std::string& command, const fs::path& log) const {
  fs::create_directories(log.parent_path());
  const std::string full =
      "cd " + shell_quote(config_.root.string()) + " && ( " + command + " ) > " + shell_quote(log.string()) + " 2>&1";
  const int status = std::system(full.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

SourceState Project::current_source_state() const {
  SourceState state;
  for (const auto& s : config_.sections) {
    detail::Blake2b<32> h;
    for (const auto& f : s.source_files) {
      const auto path = config_.root / f;
      if (!fs::exists(path)) throw BuildError("section '" + s.id + "': source file " + f.string() + " not found");
      h.field(f.generic_string()).field(detail::read_file(path));
    }
    state.digests[s.id] = detail::to_hex(h.finish());
  }
  return state;
}

VersionGraph Project::load_graph() const {
  if (!initialized()) throw Error("project is not initialized; run `mvee init` first");
  try {
    return VersionGraph::from_json(load_json_file(graph_path()));
  } catch (const nlohmann::json::parse_error& e) {
    throw PersistError(std::string("graph.json: ") + e.what());
  }
}

ResultStore Project::load_results() const { return ResultStore::load(results_path()); }

SourceState Project::load_source_state() const {
  if (!fs::exists(source_state_path())) return {};
  try {
    return SourceState::from_json(load_json_file(source_state_path()));
  } catch (const nlohmann::json::parse_error& e) {
    throw PersistError(std::string("source-state.json: ") + e.what());
  }
}

void Project::save_graph(const VersionGraph& graph) const { write_json_file(graph_path(), graph.to_json()); }

void Project::save_results(const ResultStore& db) const { db.save(results_path()); }

void Project::save_source_state(const SourceState& state) const {
  write_json_file(source_state_path(), state.to_json());
}

void Project::init() {
  if (initialized()) throw Error("state directory " + state_dir_.string() + " is already initialized");
  SourceState state;
  try {
    state = current_source_state();
  } catch (const BuildError& e) {
    throw ConfigError({std::string("sections: ") + e.what()});
  }
  VersionGraph graph;
  graph.configure(config_.section_ids());
  fs::create_directories(asm_dir());
  fs::create_directories(report_dir());
  save_results({});
  save_source_state(state);
  save_graph(graph);
}

std::string Project::next_build_id(const VersionGraph& graph) const {
  auto now = clock_();
  const auto builds = graph.builds();
  if (!builds.empty()) {
    if (auto last = parse_build_id(builds.back()); last && now <= *last) now = *last + 1;
  }
  return format_build_id(now);
}

BuildReport Project::build() {
  auto graph = load_graph();
  graph.configure(config_.section_ids());
  const auto previous = load_source_state();

  BuildReport report;
  report.build_id = next_build_id(graph);

  notify(PipelineStep::Compile);
  const auto log = state_dir_ / "logs" / (report.build_id + ".build.log");
  if (const int rc = shell(config_.build_command, log); rc != 0) {
    throw BuildError("build command exited with status " + std::to_string(rc) + "\n" + tail_lines(log, 20));
  }
  const auto asm_source = config_.root / config_.asm_output;
  if (!fs::exists(asm_source)) throw BuildError("build did not produce " + config_.asm_output.string());
  const auto asm_text = detail::read_file(asm_source);

  notify(PipelineStep::StoreAssembly);
  const auto stored = asm_dir() / (report.build_id + ".s");

  notify(PipelineStep::Analyze);
  std::map<std::string, MethodInput> inputs;
  const auto digests = current_source_state();
  try {
    const auto file = parse_asm_file(asm_text, report.build_id, stored);
    const auto cfg = build_cfg(file);
    const auto markers = find_markers(file, config_.markers);
    for (const auto& section : config_.sections) {
      auto it = std::find_if(markers.begin(), markers.end(),
                             [&](const MarkerPair& m) { return m.section_id == section.id; });
      if (it == markers.end()) throw MarkerError(MarkerError::Kind::Missing, section.id);
      MethodInput in;
      in.region = extract_region(file, cfg, *it, config_.markers);
      if (auto w = region_warning(in.region)) report.warnings.push_back(w->what());
      if (in.region.groups.empty()) throw BuildError("section '" + section.id + "' has an empty region");
      auto prev = previous.digests.find(section.id);
      in.source_modified = prev == previous.digests.end() || prev->second != digests.digests.at(section.id);
      inputs.emplace(section.id, std::move(in));
    }
  } catch (const BuildError&) {
    throw;
  } catch (const Error& e) {
    throw BuildError(std::string("assembly analysis failed: ") + e.what());
  }

  auto results = graph.record_build(report.build_id, inputs);
  for (auto& [id, r] : results) {
    SectionBuildResult s;
    s.source_modified = inputs.at(id).source_modified;
    s.outcome = r.outcome;
    s.verdict = std::move(r.verdict);
    if (s.outcome.kind == OutcomeKind::Fork) report.anomalies.push_back(id);
    report.sections.emplace(id, std::move(s));
  }

  notify(PipelineStep::Inspect);
  detail::write_file_atomic(stored, asm_text);

  notify(PipelineStep::UpdateGraph);
  save_graph(graph);
  save_source_state(digests);
  return report;
}

RunReport Project::run() {
  const auto graph = load_graph();
  if (graph.empty()) throw RunError("no build recorded yet; run `mvee build` first");
  std::map<std::string, StepOutcome> outcomes;
  RunReport report;
  for (const auto& [id, h] : graph.methods()) {
    if (h.steps.empty()) continue;
    outcomes.emplace(id, h.steps.back().outcome);
    report.build_id = std::max(report.build_id, h.steps.back().build_id);
  }

  notify(PipelineStep::Run);
  const auto results_file = config_.root / config_.results_output;
  std::error_code ec;
  fs::remove(results_file, ec);
  const auto log = state_dir_ / "logs" / (report.build_id + ".run.log");
  if (const int rc = shell(config_.run_command, log); rc != 0) {
    throw RunError("run command exited with status " + std::to_string(rc) + "\n" + tail_lines(log, 20));
  }
  if (!fs::exists(results_file)) throw RunError("run did not produce " + config_.results_output.string());

  auto db = load_results();
  try {
    const auto doc = nlohmann::json::parse(detail::read_file(results_file));
    db.ingest_run(doc, outcomes, report.build_id);
    report.ingested = doc.size();
  } catch (const IngestError& e) {
    throw RunError(std::string("IngestError::") + (e.kind() == IngestError::Kind::Schema ? "Schema" : "UnknownMethod") +
                   ": " + e.what());
  } catch (const nlohmann::json::parse_error& e) {
    throw RunError(std::string("IngestError::Schema: ") + config_.results_output.string() + ": " + e.what());
  }
  save_results(db);
  report.total_records = db.size();
  return report;
}

ReportFiles Project::report(const std::string& metric, const std::string& param) {
  const auto graph = load_graph();
  const auto db = load_results();
  notify(PipelineStep::Report);
  ReportFiles files;
  files.chart = export_report(db, graph, metric, param);
  const auto stem = sanitize(metric) + "-by-" + sanitize(param);
  files.svg = report_dir() / (stem + ".svg");
  files.json = report_dir() / (stem + ".json");
  detail::write_file_atomic(files.svg, files.chart.svg());
  write_json_file(files.json, files.chart.to_json());
  try {
    const auto modes = demo_problem_modes(db, graph, metric, param);
    files.mixed_svg = report_dir() / (stem + "-mixed.svg");
    files.single_svg = report_dir() / (stem + "-single.svg");
    detail::write_file_atomic(*files.mixed_svg, modes.mixed.svg());
    write_json_file(report_dir() / (stem + "-mixed.json"), modes.mixed.to_json());
    detail::write_file_atomic(*files.single_svg, modes.single.svg());
    write_json_file(report_dir() / (stem + "-single.json"), modes.single.to_json());
  } catch (const ReportError&) {
    // The contrast charts are optional when the latest build has no data.
  }
  return files;
}

std::string Project::graph_text() const {
  if (!initialized()) return "no builds recorded\n";
  return render_graph_text(load_graph());
}

nlohmann::json Project::builds_json() const {
  const auto graph = load_graph();
  std::map<std::string, nlohmann::json> by_build;
  for (const auto& [id, h] : graph.methods()) {
    for (const auto& s : h.steps) {
      auto& b = by_build[s.build_id];
      nlohmann::json j{{"outcome", to_string(s.outcome.kind)}, {"version", VersionId{id, s.outcome.version}.label()}};
      if (s.outcome.from) j["from"] = VersionId{id, *s.outcome.from}.label();
      b[id] = std::move(j);
    }
  }
  auto out = nlohmann::json::array();
  for (auto& [build, sections] : by_build) {
    bool anomaly = false;
    for (const auto& [_, s] : sections.items()) anomaly = anomaly || s.at("outcome") == "Fork";
    const bool stored = fs::exists(asm_dir() / (build + ".s"));
    out.push_back({{"build", build}, {"sections", sections}, {"anomaly", anomaly}, {"assemblyStored", stored}});
  }
  return out;
}

namespace {

nlohmann::json annotated_region(const MarkedRegion& region, const VersionId& version,
                                const std::map<std::size_t, std::set<std::string>>& categories) {
  auto lines = nlohmann::json::array();
  auto cats = [&](std::size_t line) {
    auto it = categories.find(line);
    return it == categories.end() ? nlohmann::json::array() : nlohmann::json(it->second);
  };
  for (std::size_t gi = 0; gi < region.groups.size(); ++gi) {
    const auto& g = region.groups[gi];
    for (const auto& label : g.leading_labels) {
      lines.push_back(
          {{"line", g.label_line}, {"group", gi}, {"kind", "label"}, {"text", label + ":"}, {"categories", cats(g.label_line)}});
    }
    for (const auto& ri : g.instructions) {
      lines.push_back({{"line", ri.line},
                       {"group", gi},
                       {"kind", "instruction"},
                       {"text", "\t" + ri.instruction.render()},
                       {"categories", cats(ri.line)}});
    }
  }
  return {{"version", version.label()}, {"build", region.build_id}, {"lines", std::move(lines)}};
}

}  // namespace

nlohmann::json Project::anomaly_json(const std::string& build_id, const std::string& section) const {
  const auto graph = load_graph();
  if (!graph.has_method(section)) throw NotFoundError("unknown section '" + section + "'");
  const auto& h = graph.history(section);
  auto step = std::find_if(h.steps.begin(), h.steps.end(), [&](const MethodStep& s) { return s.build_id == build_id; });
  if (step == h.steps.end()) throw NotFoundError("no build '" + build_id + "' for section '" + section + "'");
  if (step->outcome.kind != OutcomeKind::Fork || !step->outcome.from) {
    throw NotFoundError("build '" + build_id + "' has no anomaly in section '" + section + "'");
  }
  const auto& from = h.node(*step->outcome.from);
  const auto& to = h.node(step->outcome.version);
  const auto verdict = compare_regions(from.region_snapshot, to.region_snapshot);

  std::map<std::size_t, std::set<std::string>> source_cats;
  std::map<std::size_t, std::set<std::string>> target_cats;
  for (const auto& e : verdict.classified_edits) {
    for (auto l : e.source_lines) source_cats[l].insert(std::string(to_string(e.category)));
    for (auto l : e.target_lines) target_cats[l].insert(std::string(to_string(e.category)));
  }
  return {{"verdict", mvee::to_json(verdict)},
          {"source", annotated_region(from.region_snapshot, from.id, source_cats)},
          {"target", annotated_region(to.region_snapshot, to.id, target_cats)}};
}

nlohmann::json Project::results_json(const std::string& metric, const std::string& param) const {
  const auto graph = load_graph();
  const auto db = load_results();
  auto records = nlohmann::json::array();
  for (const auto& r : db.records()) {
    if (metric.empty() || r.metric == metric) records.push_back(to_json(r));
  }
  nlohmann::json out{{"metric", metric}, {"param", param}, {"records", std::move(records)}};
  if (!metric.empty() && !param.empty()) out["chart"] = export_report(db, graph, metric, param).to_json();
  return out;
}

}  // namespace mvee
