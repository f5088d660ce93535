#include "mvee/result_store.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "atomic_file.hpp"

namespace mvee {

namespace {

nlohmann::json param_json(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

ParamValue param_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error("parameter values must be numbers or strings");
}

std::string entry_path(std::size_t i, std::string_view field = {}) {
  std::string p = "$[" + std::to_string(i) + "]";
  if (!field.empty()) p += "." + std::string(field);
  return p;
}

}  // namespace

nlohmann::json to_json(const ResultRecord& r) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : r.params) params[k] = param_json(v);
  return {{"method", r.method}, {"version", r.version}, {"build", r.build_id}, {"params", std::move(params)},
          {"metric", r.metric}, {"value", r.value},     {"unit", r.unit}};
}

ResultRecord result_record_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.method = j.at("method").get<std::string>();
  r.version = j.at("version").get<std::size_t>();
  r.build_id = j.at("build").get<std::string>();
  for (const auto& [k, v] : j.at("params").items()) r.params.emplace(k, param_from_json(v));
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.unit = j.at("unit").get<std::string>();
  return r;
}

IngestError::IngestError(Kind kind, std::string path, std::string reason)
    : Error(kind == Kind::Schema ? "results schema error at " + path + ": " + reason
                                 : "results for unknown method at " + path + ": " + reason),
      kind_(kind),
      path_(std::move(path)),
      reason_(std::move(reason)) {}

void ResultStore::upsert(ResultRecord record) {
  auto same_key = [&](const ResultRecord& r) {
    return r.method == record.method && r.version == record.version && r.params == record.params &&
           r.metric == record.metric;
  };
  auto it = std::find_if(records_.begin(), records_.end(), same_key);
  if (it != records_.end()) {
    *it = std::move(record);
  } else {
    records_.push_back(std::move(record));
  }
}

void ResultStore::ingest_run(const nlohmann::json& results, const std::map<std::string, StepOutcome>& outcomes,
                             const std::string& build_id) {
  using K = IngestError::Kind;
  if (!results.is_array()) throw IngestError(K::Schema, "$", "expected an array of result entries");
  std::vector<ResultRecord> parsed;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& e = results[i];
    if (!e.is_object()) throw IngestError(K::Schema, entry_path(i), "expected an object");
    auto require = [&](const char* field, auto check, const char* what) -> const nlohmann::json& {
      if (!e.contains(field)) throw IngestError(K::Schema, entry_path(i, field), "missing field");
      const auto& v = e.at(field);
      if (!check(v)) throw IngestError(K::Schema, entry_path(i, field), std::string("expected ") + what);
      return v;
    };
    auto is_string = [](const nlohmann::json& v) { return v.is_string(); };
    ResultRecord r;
    r.method = require("section", is_string, "a string").get<std::string>();
    r.metric = require("metric", is_string, "a string").get<std::string>();
    r.value = require("value", [](const nlohmann::json& v) { return v.is_number(); }, "a number").get<double>();
    if (!std::isfinite(r.value)) throw IngestError(K::Schema, entry_path(i, "value"), "value must be finite");
    r.unit = e.contains("unit") ? require("unit", is_string, "a string").get<std::string>() : std::string();
    if (e.contains("params")) {
      const auto& p = require("params", [](const nlohmann::json& v) { return v.is_object(); }, "an object");
      for (const auto& [k, v] : p.items()) {
        if (!v.is_number() && !v.is_string()) {
          throw IngestError(K::Schema, entry_path(i, "params." + k), "expected a number or a string");
        }
        r.params.emplace(k, param_from_json(v));
      }
    }
    auto o = outcomes.find(r.method);
    if (o == outcomes.end()) throw IngestError(K::UnknownMethod, entry_path(i, "section"), r.method);
    r.version = o->second.version;
    r.build_id = build_id;
    parsed.push_back(std::move(r));
  }
  for (auto& r : parsed) upsert(std::move(r));
}

std::string ResultStore::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

ResultStore ResultStore::from_jsonl(std::string_view text) {
  ResultStore store;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      store.upsert(result_record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("results store line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

ResultStore ResultStore::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return from_jsonl(detail::read_file(path));
}

void ResultStore::save(const std::filesystem::path& path) const { detail::write_file_atomic(path, to_jsonl()); }

ReportError::ReportError(Kind kind, std::string detail) : Error(std::move(detail)), kind_(kind) {}

namespace {

std::optional<double> x_of(const ResultRecord& r, const std::string& param) {
  auto it = r.params.find(param);
  if (it == r.params.end()) return std::nullopt;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  return std::nullopt;
}

Chart empty_chart(const ResultStore& db, const std::string& metric, const std::string& param) {
  Chart c;
  c.title = metric + " by " + param;
  c.metric = metric;
  c.param = param;
  for (const auto& r : db.records()) {
    if (r.metric == metric && !r.unit.empty()) {
      c.unit = r.unit;
      break;
    }
  }
  return c;
}

void finish_series(ReportSeries& s) {
  std::sort(s.points.begin(), s.points.end(), [](const ReportPoint& a, const ReportPoint& b) {
    return std::tie(a.x, a.version, a.build_id) < std::tie(b.x, b.version, b.build_id);
  });
  std::set<std::size_t> versions;
  for (const auto& p : s.points) versions.insert(p.version);
  s.versions.assign(versions.begin(), versions.end());
  s.label = s.versions.size() == 1 ? VersionId{s.method, s.versions.front()}.label() : s.method + " (mixed)";
}

void require_data(const Chart& c) {
  if (c.series.empty()) {
    throw ReportError(ReportError::Kind::EmptySelection,
                      "no relevant version has data for metric '" + c.metric + "' by '" + c.param + "'");
  }
}

}  // namespace

Chart export_report(const ResultStore& db, const VersionGraph& graph, const std::string& metric,
                    const std::string& param) {
  Chart chart = empty_chart(db, metric, param);
  for (const auto& [method, h] : graph.methods()) {
    for (auto ordinal : h.open_branches) {
      ReportSeries s;
      s.method = method;
      for (const auto& r : db.records()) {
        if (r.method != method || r.version != ordinal || r.metric != metric) continue;
        if (auto x = x_of(r, param)) s.points.push_back({*x, r.value, r.version, r.build_id});
      }
      if (s.points.empty()) continue;
      finish_series(s);
      chart.series.push_back(std::move(s));
    }
  }
  require_data(chart);
  return chart;
}

ProblemModeCharts demo_problem_modes(const ResultStore& db, const VersionGraph& graph, const std::string& metric,
                                     const std::string& param) {
  ProblemModeCharts out{empty_chart(db, metric, param), empty_chart(db, metric, param)};
  for (const auto& [method, h] : graph.methods()) {
    // Mixed: per x, the value of whichever version the most recent build measured.
    std::map<double, const ResultRecord*> latest;
    for (const auto& r : db.records()) {
      if (r.method != method || r.metric != metric) continue;
      auto x = x_of(r, param);
      if (!x) continue;
      auto& slot = latest[*x];
      if (slot == nullptr || std::tie(r.build_id, r.version) > std::tie(slot->build_id, slot->version)) slot = &r;
    }
    if (!latest.empty()) {
      ReportSeries s;
      s.method = method;
      for (const auto& [x, r] : latest) s.points.push_back({x, r->value, r->version, r->build_id});
      finish_series(s);
      out.mixed.series.push_back(std::move(s));
    }

    // Single: only the version the latest build resolved to.
    if (h.steps.empty()) continue;
    const auto current = h.steps.back().outcome.version;
    ReportSeries s;
    s.method = method;
    for (const auto& r : db.records()) {
      if (r.method != method || r.version != current || r.metric != metric) continue;
      if (auto x = x_of(r, param)) s.points.push_back({*x, r.value, r.version, r.build_id});
    }
    if (s.points.empty()) continue;
    finish_series(s);
    out.single.series.push_back(std::move(s));
  }
  require_data(out.mixed);
  require_data(out.single);
  return out;
}

nlohmann::json Chart::to_json() const {
  auto series_json = nlohmann::json::array();
  for (const auto& s : series) {
    auto points = nlohmann::json::array();
    for (const auto& p : s.points) {
      points.push_back({{"x", p.x},
                        {"y", p.y},
                        {"version", VersionId{s.method, p.version}.label()},
                        {"build", p.build_id}});
    }
    auto versions = nlohmann::json::array();
    for (auto v : s.versions) versions.push_back(VersionId{s.method, v}.label());
    series_json.push_back(
        {{"label", s.label}, {"method", s.method}, {"versions", std::move(versions)}, {"points", std::move(points)}});
  }
  return {{"title", title}, {"metric", metric}, {"param", param}, {"unit", unit}, {"series", std::move(series_json)}};
}

}  // namespace mvee
