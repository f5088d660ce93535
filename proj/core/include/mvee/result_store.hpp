#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvee/error.hpp"
#include "mvee/version_graph.hpp"

namespace mvee {

using ParamValue = std::variant<double, std::string>;
using Params = std::map<std::string, ParamValue>;

struct ResultRecord {
  std::string method;
  std::size_t version = 0;  // ordinal within `method`
  std::string build_id;     // build that produced the value
  Params params;
  std::string metric;
  double value = 0;
  std::string unit;

  VersionId version_id() const { return {method, version}; }
  bool operator==(const ResultRecord&) const = default;
};

nlohmann::json to_json(const ResultRecord& record);
ResultRecord result_record_from_json(const nlohmann::json& j);

class IngestError : public Error {
 public:
  enum class Kind { Schema, UnknownMethod };
  IngestError(Kind kind, std::string path, std::string reason);

  Kind kind() const { return kind_; }
  const std::string& path() const { return path_; }
  const std::string& reason() const { return reason_; }

 private:
  Kind kind_;
  std::string path_;
  std::string reason_;
};

/// Records keyed by (method, version, params, metric). Re-recording a key
/// replaces the value in place; new keys append.
class ResultStore {
 public:
  /// Binds every entry of a `mvee-results.json` document to the version its
  /// method resolved to in `outcomes`. All-or-nothing.
  void ingest_run(const nlohmann::json& results, const std::map<std::string, StepOutcome>& outcomes,
                  const std::string& build_id);

  void upsert(ResultRecord record);

  const std::vector<ResultRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::string to_jsonl() const;
  static ResultStore from_jsonl(std::string_view text);

  static ResultStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const ResultStore&) const = default;

 private:
  std::vector<ResultRecord> records_;
};

class ReportError : public Error {
 public:
  enum class Kind { EmptySelection };
  ReportError(Kind kind, std::string detail);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ReportPoint {
  double x = 0;
  double y = 0;
  std::size_t version = 0;  // provenance of the value
  std::string build_id;
  bool operator==(const ReportPoint&) const = default;
};

struct ReportSeries {
  std::string label;  // `method.Vn`, or `method (mixed)` when spliced from several versions
  std::string method;
  std::vector<std::size_t> versions;  // distinct versions contributing points
  std::vector<ReportPoint> points;    // sorted by x
  bool operator==(const ReportSeries&) const = default;
};

struct Chart {
  std::string title;
  std::string metric;
  std::string param;
  std::string unit;
  std::vector<ReportSeries> series;

  /// Line chart, one polyline per series.
  std::string svg() const;
  nlohmann::json to_json() const;
  bool operator==(const Chart&) const = default;
};

/// One series per relevant (method, version) that has data for `metric`.
Chart export_report(const ResultStore& db, const VersionGraph& graph, const std::string& metric,
                    const std::string& param);

struct ProblemModeCharts {
  Chart mixed;   // per x, whichever version the latest build produced
  Chart single;  // only the versions of the latest build
};

ProblemModeCharts demo_problem_modes(const ResultStore& db, const VersionGraph& graph, const std::string& metric,
                                     const std::string& param);

}  // namespace mvee
