#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mvee/result_store.hpp"

using namespace mvee;
namespace tst = mvee::testing;

namespace {

using json = nlohmann::json;

json entry(const std::string& section, double selectivity, double value) {
  return {{"section", section},
          {"params", {{"selectivity", selectivity}}},
          {"metric", "runtime"},
          {"value", value},
          {"unit", "ms"}};
}

ResultRecord record(std::string method, std::size_t version, double x, double y, std::string build = "b") {
  return {std::move(method), version, std::move(build), {{"selectivity", x}}, "runtime", y, "ms"};
}

std::size_t count_polylines(const boost::property_tree::ptree& t) {
  std::size_t n = 0;
  for (const auto& [name, child] : t) n += (name == "polyline") + count_polylines(child);
  return n;
}

std::size_t polylines_in(const std::string& svg) {
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  boost::property_tree::read_xml(in, tree);  // throws on malformed XML
  return count_polylines(tree);
}

std::vector<std::string> series_labels(const Chart& c) {
  std::vector<std::string> out;
  for (const auto& s : c.series) out.push_back(s.label);
  return out;
}

}  // namespace

TEST(ResultStore, ForkOutcomeAppendsUnderTheNewVersion) {
  ResultStore db;
  db.ingest_run(json::array({entry("B0", 1.0, 700)}), {{"B0", {OutcomeKind::Initial, 0, {}}}}, "b0");
  db.ingest_run(json::array({entry("B0", 1.0, 812)}), {{"B0", {OutcomeKind::Fork, 1, 0}}}, "b1");
  ASSERT_EQ(db.size(), 2u);
  EXPECT_EQ(db.records()[0], record("B0", 0, 1.0, 700, "b0"));
  EXPECT_EQ(db.records()[1], record("B0", 1, 1.0, 812, "b1"));
}

TEST(ResultStore, UnchangedOutcomeReplacesTheSameKey) {
  ResultStore db;
  db.ingest_run(json::array({entry("M", 0.5, 10), entry("M", 1.0, 20)}), {{"M", {OutcomeKind::Modified, 2, {}}}}, "b0");
  db.ingest_run(json::array({entry("M", 0.5, 11)}), {{"M", {OutcomeKind::Unchanged, 2, {}}}}, "b1");
  ASSERT_EQ(db.size(), 2u);
  EXPECT_EQ(db.records()[0], record("M", 2, 0.5, 11, "b1"));
  EXPECT_EQ(db.records()[1], record("M", 2, 1.0, 20, "b0"));
}

TEST(ResultStore, DistinctParamTypesAreDistinctKeys) {
  ResultStore db;
  db.upsert({"M", 0, "b", {{"n", 1.0}}, "runtime", 1, "ms"});
  db.upsert({"M", 0, "b", {{"n", std::string("1")}}, "runtime", 2, "ms"});
  db.upsert({"M", 0, "b", {{"n", 1.0}}, "cycles", 3, ""});
  EXPECT_EQ(db.size(), 3u);
}

TEST(ResultStore, UnknownMethodIsRejectedAndNothingIsRecorded) {
  ResultStore db;
  try {
    db.ingest_run(json::array({entry("M", 1, 1), entry("X", 1, 1)}), {{"M", {}}}, "b");
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_EQ(e.kind(), IngestError::Kind::UnknownMethod);
    EXPECT_EQ(e.reason(), "X");
  }
  EXPECT_TRUE(db.empty());
}

TEST(ResultStore, SchemaErrorsNameTheOffendingPath) {
  const std::map<std::string, StepOutcome> oc{{"M", {}}};
  struct Case {
    json doc;
    std::string path;
  };
  auto without = [](const char* field) {
    auto e = entry("M", 1, 1);
    e.erase(field);
    return json::array({e});
  };
  auto with = [](const char* field, json v) {
    auto e = entry("M", 1, 1);
    e[field] = std::move(v);
    return json::array({e});
  };
  const std::vector<Case> cases{
      {json::object(), "$"},
      {json::array({1}), "$[0]"},
      {without("section"), "$[0].section"},
      {without("metric"), "$[0].metric"},
      {without("value"), "$[0].value"},
      {with("value", "fast"), "$[0].value"},
      {with("params", json::array()), "$[0].params"},
      {with("params", {{"selectivity", true}}), "$[0].params.selectivity"},
  };
  for (const auto& c : cases) {
    ResultStore db;
    try {
      db.ingest_run(c.doc, oc, "b");
      ADD_FAILURE() << c.doc.dump();
    } catch (const IngestError& e) {
      EXPECT_EQ(e.kind(), IngestError::Kind::Schema) << c.doc.dump();
      EXPECT_EQ(e.path(), c.path) << c.doc.dump();
    }
    EXPECT_TRUE(db.empty());
  }
}

TEST(ResultStore, ReingestWithUnchangedOutcomesIsIdempotent) {
  const auto doc = json::array({entry("B1", 0.1, 5), entry("B1", 0.5, 7), entry("M", 0.5, 9)});
  const std::map<std::string, StepOutcome> oc{{"B1", {OutcomeKind::Unchanged, 1, {}}},
                                              {"M", {OutcomeKind::Unchanged, 3, {}}}};
  ResultStore once;
  once.ingest_run(doc, oc, "b");
  auto twice = once;
  twice.ingest_run(doc, oc, "b");
  EXPECT_EQ(once, twice);
}

TEST(ResultStorePersist, JsonlRoundTripIsByteStable) {
  ResultStore db;
  db.upsert(record("B1", 0, 0.25, 1.5));
  db.upsert({"M", 3, "b", {{"name", std::string("x y")}, {"n", 1e-9}}, "runtime", 0.1, "ms"});
  const auto text = db.to_jsonl();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  const auto back = ResultStore::from_jsonl(text);
  EXPECT_EQ(back, db);
  EXPECT_EQ(back.to_jsonl(), text);
  tst::TempDir dir;
  db.save(dir.path() / "results.jsonl");
  EXPECT_EQ(ResultStore::load(dir.path() / "results.jsonl"), db);
  EXPECT_TRUE(ResultStore::load(dir.path() / "absent.jsonl").empty());
  EXPECT_THROW(ResultStore::from_jsonl(text.substr(0, text.size() / 2)), Error);
}

TEST(ExportReport, ForkedMethodShowsBothVersionsAndMergedShowsOnlyTheNewest) {
  const auto graph = tst::replay_walkthrough().graph;
  ResultStore db;
  for (std::size_t v : {0, 1}) db.upsert(record("B1", v, 0.5, 10.0 + v));
  for (std::size_t v : {0, 1, 2}) db.upsert(record("B0", v, 0.5, 20.0 + v));
  const auto chart = export_report(db, graph, "runtime", "selectivity");
  EXPECT_EQ(series_labels(chart), (std::vector<std::string>{"B0.V2", "B1.V0", "B1.V1"}));
  EXPECT_EQ(polylines_in(chart.svg()), 3u);
  EXPECT_NE(chart.svg().find("B1.V1"), std::string::npos);
  const auto j = chart.to_json();
  EXPECT_EQ(j["series"].size(), 3u);
  EXPECT_EQ(j["metric"], "runtime");
  EXPECT_EQ(j["unit"], "ms");
}

TEST(ExportReport, SingleRecordIsOneSeriesWithOnePoint) {
  const auto graph = tst::replay_walkthrough().graph;
  ResultStore db;
  db.upsert(record("M", 3, 1.0, 4.0));
  const auto chart = export_report(db, graph, "runtime", "selectivity");
  ASSERT_EQ(chart.series.size(), 1u);
  EXPECT_EQ(chart.series[0].points, (std::vector<ReportPoint>{{1.0, 4.0, 3, "b"}}));
  EXPECT_EQ(polylines_in(chart.svg()), 1u);
}

TEST(ExportReport, PointsAreSortedByParameter) {
  const auto graph = tst::replay_walkthrough().graph;
  ResultStore db;
  for (double x : {0.9, 0.1, 0.5}) db.upsert(record("M", 3, x, x * 2));
  const auto chart = export_report(db, graph, "runtime", "selectivity");
  ASSERT_EQ(chart.series.size(), 1u);
  const auto& p = chart.series[0].points;
  EXPECT_TRUE(std::is_sorted(p.begin(), p.end(), [](auto& a, auto& b) { return a.x < b.x; }));
}

TEST(ExportReport, EmptySelectionErrors) {
  const auto graph = tst::replay_walkthrough().graph;
  EXPECT_THROW(export_report({}, graph, "runtime", "selectivity"), ReportError);
  ResultStore stale;
  stale.upsert(record("M", 0, 0.5, 1));  // M.V0 is no longer relevant
  try {
    export_report(stale, graph, "runtime", "selectivity");
    FAIL();
  } catch (const ReportError& e) {
    EXPECT_EQ(e.kind(), ReportError::Kind::EmptySelection);
  }
  ResultStore other_metric;
  other_metric.upsert({"M", 3, "b", {{"selectivity", 0.5}}, "cycles", 1, ""});
  EXPECT_THROW(export_report(other_metric, graph, "runtime", "selectivity"), ReportError);
  EXPECT_THROW(demo_problem_modes({}, graph, "runtime", "selectivity"), ReportError);
}

TEST(ExportReport, SvgEscapesLabels) {
  auto graph = tst::replay_walkthrough().graph;
  ResultStore db;
  db.upsert({"M", 3, "b", {{"selectivity", 0.5}}, "a<b&c", 1, "\"ms\""});
  EXPECT_EQ(polylines_in(export_report(db, graph, "a<b&c", "selectivity").svg()), 1u);
}

// Two versions of one method that trade places: V0 wins at low selectivity,
// V1 at high selectivity. The latest build ran V1 only on the upper half.
TEST(ProblemModes, CrossingVersionsAreSplicedOrDroppedButReportedInFull) {
  const auto replay = tst::replay_walkthrough();
  ASSERT_EQ(replay.graph.history("B1").steps.back().outcome.version, 1u);
  ResultStore db;
  const std::vector<double> xs{0.0, 0.25, 0.5, 0.75, 1.0};
  for (double x : xs) db.upsert(record("B1", 0, x, 10 + 20 * x, "b1"));
  for (double x : xs) db.upsert(record("B1", 1, x, 20 + 5 * x, x >= 0.5 ? "b2" : "b1"));
  // Same build id for both versions on the lower half: version order breaks the tie.
  const auto full = export_report(db, replay.graph, "runtime", "selectivity");
  ASSERT_EQ(full.series.size(), 2u);
  const auto& v0 = full.series[0].points;
  const auto& v1 = full.series[1].points;
  EXPECT_LT(v0.front().y, v1.front().y);
  EXPECT_GT(v0.back().y, v1.back().y);
  for (const auto& s : full.series) {
    for (const auto& p : s.points) EXPECT_EQ(p.version, s.versions.at(0));
  }

  const auto modes = demo_problem_modes(db, replay.graph, "runtime", "selectivity");
  ASSERT_EQ(modes.mixed.series.size(), 1u);
  ASSERT_EQ(modes.single.series.size(), 1u);
  const auto& mixed = modes.mixed.series[0];
  EXPECT_EQ(mixed.versions, (std::vector<std::size_t>{1}));
  EXPECT_EQ(modes.single.series[0].label, "B1.V1");
  EXPECT_EQ(polylines_in(modes.mixed.svg()), 1u);
  EXPECT_EQ(polylines_in(modes.single.svg()), 1u);
  EXPECT_EQ(polylines_in(full.svg()), 2u);
}

TEST(ProblemModes, MixedChartSplicesAcrossBuilds) {
  const auto replay = tst::replay_walkthrough();
  ResultStore db;
  db.upsert(record("B1", 0, 0.0, 10, "b1"));
  db.upsert(record("B1", 0, 1.0, 30, "b1"));
  db.upsert(record("B1", 1, 1.0, 25, "b2"));
  const auto modes = demo_problem_modes(db, replay.graph, "runtime", "selectivity");
  const auto& mixed = modes.mixed.series.at(0);
  EXPECT_EQ(mixed.versions, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(mixed.label, "B1 (mixed)");
  ASSERT_EQ(mixed.points.size(), 2u);
  EXPECT_EQ(mixed.points[0].version, 0u);
  EXPECT_EQ(mixed.points[1].version, 1u);
  EXPECT_EQ(modes.single.series.at(0).points.size(), 1u);
}

TEST(ProblemModes, SingleVersionDataGivesIdenticalCharts) {
  const auto replay = tst::replay_walkthrough();
  ResultStore db;
  for (double x : {0.1, 0.5, 0.9}) db.upsert(record("M", 3, x, x));
  const auto full = export_report(db, replay.graph, "runtime", "selectivity");
  const auto modes = demo_problem_modes(db, replay.graph, "runtime", "selectivity");
  EXPECT_EQ(modes.mixed.series, full.series);
  EXPECT_EQ(modes.single.series, full.series);
}

TEST(ExportReportProperty, OneSeriesPerRelevantVersionWithDataAndNothingElse) {
  const auto graph = tst::replay_walkthrough().graph;
  const std::map<std::string, std::size_t> versions{{"M", 4}, {"B0", 3}, {"B1", 2}};
  for (unsigned seed = 0; seed < 200; ++seed) {
    std::mt19937 rng(seed);
    ResultStore db;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      auto it = versions.begin();
      std::advance(it, rng() % versions.size());
      db.upsert(record(it->first, rng() % it->second, (rng() % 5) / 4.0, rng() % 100));
    }
    std::set<std::string> expected;
    for (const auto& r : db.records()) {
      const auto rel = graph.relevant_versions(r.method);
      if (std::find(rel.begin(), rel.end(), r.version_id()) != rel.end()) expected.insert(r.version_id().label());
    }
    SCOPED_TRACE("seed " + std::to_string(seed));
    if (expected.empty()) {
      EXPECT_THROW(export_report(db, graph, "runtime", "selectivity"), ReportError);
      continue;
    }
    const auto chart = export_report(db, graph, "runtime", "selectivity");
    const auto labels = series_labels(chart);
    EXPECT_EQ(std::set<std::string>(labels.begin(), labels.end()), expected);
    EXPECT_EQ(labels.size(), expected.size());
    EXPECT_EQ(polylines_in(chart.svg()), labels.size());
  }
}
