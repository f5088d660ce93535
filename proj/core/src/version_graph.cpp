#include "mvee/version_graph.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

namespace mvee {

std::string VersionId::label() const { return method + ".V" + std::to_string(ordinal); }

VersionId VersionId::parse(std::string_view label) {
  const auto dot = label.rfind(".V");
  if (dot == std::string_view::npos || dot == 0 || dot + 2 >= label.size()) {
    throw Error("malformed version label '" + std::string(label) + "'");
  }
  VersionId id;
  id.method = std::string(label.substr(0, dot));
  const auto digits = label.substr(dot + 2);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id.ordinal);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw Error("malformed version label '" + std::string(label) + "'");
  }
  return id;
}

std::string_view to_string(VersionOrigin origin) {
  switch (origin) {
    case VersionOrigin::Initial: return "Initial";
    case VersionOrigin::SourceModification: return "SourceModification";
    case VersionOrigin::AnomalyFork: return "AnomalyFork";
  }
  return "?";
}

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Initial: return "Initial";
    case OutcomeKind::Unchanged: return "Unchanged";
    case OutcomeKind::Modified: return "Modified";
    case OutcomeKind::Fork: return "Fork";
    case OutcomeKind::Reverted: return "Reverted";
  }
  return "?";
}

namespace {

VersionOrigin origin_from_string(std::string_view s) {
  for (auto o : {VersionOrigin::Initial, VersionOrigin::SourceModification, VersionOrigin::AnomalyFork}) {
    if (to_string(o) == s) return o;
  }
  throw PersistError("unknown version origin '" + std::string(s) + "'");
}

OutcomeKind outcome_from_string(std::string_view s) {
  for (auto k : {OutcomeKind::Initial, OutcomeKind::Unchanged, OutcomeKind::Modified, OutcomeKind::Fork,
                 OutcomeKind::Reverted}) {
    if (to_string(k) == s) return k;
  }
  throw PersistError("unknown outcome '" + std::string(s) + "'");
}

std::string graph_error_message(GraphError::Kind kind, const std::string& method) {
  switch (kind) {
    case GraphError::Kind::UnknownMethod: return "method '" + method + "' is not monitored";
    case GraphError::Kind::MissingMethod: return "build supplies no region for method '" + method + "'";
    case GraphError::Kind::DuplicateBuild: return "build '" + method + "' is already recorded";
  }
  return "graph error";
}

}  // namespace

GraphError::GraphError(Kind kind, std::string method)
    : Error(graph_error_message(kind, method)), kind_(kind), method_(std::move(method)) {}

std::vector<std::size_t> MethodHistory::matching_order() const {
  std::vector<std::int64_t> last_ref(nodes.size(), -1);
  for (std::size_t i = 0; i < steps.size(); ++i) last_ref.at(steps[i].outcome.version) = static_cast<std::int64_t>(i);
  auto order = open_branches;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (last_ref[a] != last_ref[b]) return last_ref[a] > last_ref[b];
    return a > b;
  });
  return order;
}

void VersionGraph::configure(const std::vector<std::string>& methods) {
  for (const auto& m : methods) methods_.try_emplace(m);
}

bool VersionGraph::empty() const {
  return std::all_of(methods_.begin(), methods_.end(), [](const auto& kv) { return kv.second.steps.empty(); });
}

const MethodHistory& VersionGraph::history(const std::string& method) const {
  auto it = methods_.find(method);
  if (it == methods_.end()) throw GraphError(GraphError::Kind::UnknownMethod, method);
  return it->second;
}

std::vector<VersionId> VersionGraph::relevant_versions(const std::string& method) const {
  std::vector<VersionId> out;
  for (auto o : history(method).open_branches) out.push_back({method, o});
  return out;
}

std::vector<std::string> VersionGraph::builds() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& [_, h] : methods_) {
    for (const auto& s : h.steps) {
      if (seen.insert(s.build_id).second) out.push_back(s.build_id);
    }
  }
  // Build ids are timestamps, so lexical order is recording order.
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::string, MethodResult> VersionGraph::record_build(const std::string& build_id,
                                                               const std::map<std::string, MethodInput>& inputs) {
  for (const auto& [method, _] : inputs) {
    if (!has_method(method)) throw GraphError(GraphError::Kind::UnknownMethod, method);
  }
  for (const auto& [method, h] : methods_) {
    if (inputs.count(method) == 0) throw GraphError(GraphError::Kind::MissingMethod, method);
    if (!h.steps.empty() && h.steps.back().build_id == build_id) {
      throw GraphError(GraphError::Kind::DuplicateBuild, build_id);
    }
  }

  // Work on a copy so that a failing comparison leaves the graph untouched.
  auto next = methods_;
  std::map<std::string, MethodResult> results;
  for (const auto& [method, input] : inputs) {
    auto& h = next.at(method);
    MethodResult r;
    auto add_node = [&](VersionOrigin origin, std::vector<std::size_t> parents) {
      const std::size_t ordinal = h.nodes.size();
      h.nodes.push_back(VersionNode{{method, ordinal}, build_id, input.region, origin, std::move(parents)});
      return ordinal;
    };

    if (h.nodes.empty()) {
      const auto v = add_node(VersionOrigin::Initial, {});
      h.open_branches = {v};
      r.outcome = {OutcomeKind::Initial, v, std::nullopt};
    } else if (input.source_modified) {
      const auto v = add_node(VersionOrigin::SourceModification, h.open_branches);
      h.open_branches = {v};
      r.outcome = {OutcomeKind::Modified, v, std::nullopt};
    } else {
      const auto order = h.matching_order();
      std::optional<Verdict> first;
      for (auto o : order) {
        auto verdict = compare_regions(h.node(o).region_snapshot, input.region);
        if (verdict.equivalent()) {
          r.outcome = {o == order.front() ? OutcomeKind::Unchanged : OutcomeKind::Reverted, o, std::nullopt};
          r.verdict = std::move(verdict);
          break;
        }
        if (!first) first = std::move(verdict);
      }
      if (!r.verdict) {
        const auto v = add_node(VersionOrigin::AnomalyFork, {order.front()});
        h.open_branches.push_back(v);
        r.outcome = {OutcomeKind::Fork, v, order.front()};
        r.verdict = std::move(first);
      }
    }
    h.steps.push_back({build_id, r.outcome});
    results.emplace(method, std::move(r));
  }
  methods_ = std::move(next);
  return results;
}

nlohmann::json to_json(const MarkedRegion& region) {
  auto groups = nlohmann::json::array();
  for (const auto& g : region.groups) {
    auto instructions = nlohmann::json::array();
    for (const auto& ri : g.instructions) instructions.push_back({{"line", ri.line}, {"text", ri.instruction.render()}});
    groups.push_back({
        {"labels", g.leading_labels},
        {"labelLine", g.label_line},
        {"terminator", to_string(g.terminator)},
        {"successor", to_string(g.successor)},
        {"instructions", std::move(instructions)},
    });
  }
  return {
      {"section", region.section_id},
      {"build", region.build_id},
      {"entryGroup", region.entry_group},
      {"endReachable", region.end_reachable},
      {"groups", std::move(groups)},
  };
}

MarkedRegion marked_region_from_json(const nlohmann::json& j) {
  MarkedRegion r;
  r.section_id = j.at("section").get<std::string>();
  r.build_id = j.at("build").get<std::string>();
  r.entry_group = j.at("entryGroup").get<std::size_t>();
  r.end_reachable = j.at("endReachable").get<bool>();
  for (const auto& gj : j.at("groups")) {
    FallthroughGroup g;
    g.leading_labels = gj.at("labels").get<std::vector<std::string>>();
    g.label_line = gj.at("labelLine").get<std::size_t>();
    g.terminator = terminator_from_string(gj.at("terminator").get<std::string>());
    g.successor = group_successor_from_string(gj.at("successor").get<std::string>());
    for (const auto& ij : gj.at("instructions")) {
      const auto line = ij.at("line").get<std::size_t>();
      g.instructions.push_back({parse_instruction(ij.at("text").get<std::string>(), line), line});
    }
    r.groups.push_back(std::move(g));
  }
  return r;
}

nlohmann::json VersionGraph::to_json() const {
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [name, h] : methods_) {
    auto versions = nlohmann::json::array();
    for (const auto& n : h.nodes) {
      versions.push_back({
          {"ordinal", n.id.ordinal},
          {"label", n.id.label()},
          {"createdBuild", n.created_build},
          {"origin", to_string(n.origin)},
          {"parents", n.parents},
          {"region", mvee::to_json(n.region_snapshot)},
      });
    }
    auto steps = nlohmann::json::array();
    for (const auto& s : h.steps) {
      nlohmann::json sj{{"build", s.build_id}, {"outcome", to_string(s.outcome.kind)}, {"version", s.outcome.version}};
      if (s.outcome.from) sj["from"] = *s.outcome.from;
      steps.push_back(std::move(sj));
    }
    methods[name] = {{"versions", std::move(versions)}, {"steps", std::move(steps)}, {"openBranches", h.open_branches}};
  }
  return {{"schema", 1}, {"methods", std::move(methods)}};
}

VersionGraph VersionGraph::from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("schema")) throw PersistError("graph document has no schema field");
    if (j.at("schema") != 1) throw PersistError("unsupported graph schema " + j.at("schema").dump());
    VersionGraph g;
    for (const auto& [name, mj] : j.at("methods").items()) {
      MethodHistory h;
      for (const auto& vj : mj.at("versions")) {
        VersionNode n;
        n.id = {name, vj.at("ordinal").get<std::size_t>()};
        if (n.id.ordinal != h.nodes.size()) throw PersistError("version ordinals of '" + name + "' are not dense");
        n.created_build = vj.at("createdBuild").get<std::string>();
        n.origin = origin_from_string(vj.at("origin").get<std::string>());
        n.parents = vj.at("parents").get<std::vector<std::size_t>>();
        n.region_snapshot = marked_region_from_json(vj.at("region"));
        h.nodes.push_back(std::move(n));
      }
      for (const auto& sj : mj.at("steps")) {
        MethodStep s;
        s.build_id = sj.at("build").get<std::string>();
        s.outcome.kind = outcome_from_string(sj.at("outcome").get<std::string>());
        s.outcome.version = sj.at("version").get<std::size_t>();
        if (sj.contains("from")) s.outcome.from = sj.at("from").get<std::size_t>();
        if (s.outcome.version >= h.nodes.size()) throw PersistError("step references unknown version");
        h.steps.push_back(std::move(s));
      }
      h.open_branches = mj.at("openBranches").get<std::vector<std::size_t>>();
      for (auto o : h.open_branches) {
        if (o >= h.nodes.size()) throw PersistError("open branch references unknown version");
      }
      g.methods_.emplace(name, std::move(h));
    }
    return g;
  } catch (const PersistError&) {
    throw;
  } catch (const std::exception& e) {
    throw PersistError(std::string("malformed graph document: ") + e.what());
  }
}

namespace {

std::string describe_node(const MethodHistory& h, const VersionNode& n) {
  std::ostringstream out;
  out << "V" << n.id.ordinal;
  if (std::find(h.open_branches.begin(), h.open_branches.end(), n.id.ordinal) != h.open_branches.end()) {
    out << " [relevant]";
  }
  switch (n.origin) {
    case VersionOrigin::Initial:
      out << " initial";
      break;
    case VersionOrigin::SourceModification:
      out << " modified";
      if (n.parents.size() > 1) {
        out << ", merges";
        for (auto p : n.parents) out << " V" << p;
      }
      break;
    case VersionOrigin::AnomalyFork:
      out << " anomaly fork of V" << n.parents.front();
      break;
  }
  out << " (" << n.created_build << ")";
  std::vector<std::string> reused;
  for (const auto& s : h.steps) {
    if (s.outcome.version == n.id.ordinal &&
        (s.outcome.kind == OutcomeKind::Unchanged || s.outcome.kind == OutcomeKind::Reverted)) {
      reused.push_back(s.build_id + (s.outcome.kind == OutcomeKind::Reverted ? " reverted" : ""));
    }
  }
  if (!reused.empty()) {
    out << " seen again:";
    for (const auto& r : reused) out << " " << r;
  }
  return out.str();
}

std::string lane_row(std::size_t columns, std::size_t star) {
  std::string row;
  for (std::size_t i = 0; i < columns; ++i) {
    if (i > 0) row += ' ';
    row += i == star ? '*' : '|';
  }
  return row;
}

}  // namespace

std::string render_graph_text(const VersionGraph& graph) {
  if (graph.empty()) return "no builds recorded\n";
  std::ostringstream out;
  for (const auto& [name, h] : graph.methods()) {
    out << name << "\n";
    if (h.nodes.empty()) {
      out << "  (no versions)\n\n";
      continue;
    }
    // Lanes start at the open branch tips, newest first.
    std::vector<std::size_t> cols(h.open_branches.rbegin(), h.open_branches.rend());
    const std::size_t width = 2 * (h.nodes.size() + 1);
    for (auto it = h.nodes.rbegin(); it != h.nodes.rend(); ++it) {
      const auto& n = *it;
      auto c = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), n.id.ordinal) - cols.begin());
      if (c == cols.size()) cols.push_back(n.id.ordinal);
      auto row = lane_row(cols.size(), c);
      row.resize(std::max(row.size() + 2, width), ' ');
      out << "  " << row << describe_node(h, n) << "\n";

      const std::size_t before = cols.size();
      if (n.parents.empty()) {
        cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(c));
      } else {
        cols[c] = n.parents.front();
        std::string merge = lane_row(before, before);
        bool merged = false;
        for (std::size_t k = 1; k < n.parents.size(); ++k) {
          if (std::find(cols.begin(), cols.end(), n.parents[k]) != cols.end()) continue;
          cols.push_back(n.parents[k]);
          merge += "\\";
          merged = true;
        }
        if (merged) out << "  " << merge << "\n";
      }
      // Lanes that now wait for the same version join.
      std::string join;
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (std::find(kept.begin(), kept.end(), cols[i]) != kept.end()) {
          join += "/";
        } else {
          if (i > 0) join += ' ';
          join += '|';
          kept.push_back(cols[i]);
        }
      }
      if (kept.size() != cols.size()) out << "  " << join << "\n";
      cols = kept;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace mvee
