#ifndef LATSIM_GRAPH_HPP_
#define LATSIM_GRAPH_HPP_

// Thresholded similarity network: induction, topology and serialization.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latsim/embedding.hpp"
#include "latsim/error.hpp"
#include "latsim/io.hpp"

namespace latsim {

struct Edge {
  std::size_t i = 0, j = 0;  // i < j
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

using EdgeKey = std::pair<std::size_t, std::size_t>;
using EdgeSet = std::set<EdgeKey>;

struct SimilarityGraph {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;  // sorted by (i, j)
  double threshold = 0.0;

  EdgeSet edge_set() const {
    EdgeSet s;
    for (const auto& e : edges) s.emplace(e.i, e.j);
    return s;
  }

  bool operator==(const SimilarityGraph&) const = default;
};

// Keeps every pair i != j with s_ij >= threshold.
inline SimilarityGraph induce(const SimilarityMatrix& m, double threshold) {
  if (!(threshold >= -1.0 && threshold <= 1.0))
    fail(ErrorCode::ConfigInvalid, "threshold must lie in [-1, 1]");
  SimilarityGraph g{m.entity_ids, {}, threshold};
  const auto n = m.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = m.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (s >= threshold) g.edges.push_back({i, j, s});
    }
  return g;
}

// Keeps the `count` strongest pairs; ties at the cut go to the
// lexicographically smaller (i, j). The recorded threshold is the weakest
// retained weight.
inline SimilarityGraph induce_top(const SimilarityMatrix& m, std::size_t count) {
  const auto n = m.size();
  std::vector<Edge> all;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      all.push_back({i, j, m.S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
  std::stable_sort(all.begin(), all.end(), [](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return std::pair(a.i, a.j) < std::pair(b.i, b.j);
  });
  if (count > all.size()) count = all.size();
  all.resize(count);
  SimilarityGraph g{m.entity_ids, std::move(all), 1.0};
  for (const auto& e : g.edges) g.threshold = std::min(g.threshold, e.weight);
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
  return g;
}

struct TopologyReport {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t component_count = 0;
  std::size_t largest_component_size = 0;
  std::vector<std::size_t> degree;                    // per node
  std::vector<std::vector<std::size_t>> components;  // node indices, ascending; ordered by first node
  std::vector<std::size_t> isolated;
  std::vector<std::size_t> hubs;  // node indices by degree desc, then index; degree > 0 only
};

inline TopologyReport topology(const SimilarityGraph& g) {
  const auto n = g.nodes.size();
  TopologyReport r;
  r.node_count = n;
  r.edge_count = g.edges.size();
  r.degree.assign(n, 0);
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : g.edges) {
    if (e.i >= n || e.j >= n || e.i == e.j)
      fail(ErrorCode::DimensionMismatch, "edge references an invalid node");
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
    ++r.degree[e.i];
    ++r.degree[e.j];
  }
  std::vector<bool> seen(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      comp.push_back(u);
      for (auto v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
    }
    std::sort(comp.begin(), comp.end());
    r.largest_component_size = std::max(r.largest_component_size, comp.size());
    r.components.push_back(std::move(comp));
  }
  r.component_count = r.components.size();
  for (std::size_t u = 0; u < n; ++u)
    if (r.degree[u] == 0) r.isolated.push_back(u);
  for (std::size_t u = 0; u < n; ++u)
    if (r.degree[u] > 0) r.hubs.push_back(u);
  std::stable_sort(r.hubs.begin(), r.hubs.end(),
                   [&](std::size_t a, std::size_t b) { return r.degree[a] > r.degree[b]; });
  return r;
}

inline nlohmann::ordered_json topology_to_json(const SimilarityGraph& g, const TopologyReport& r) {
  nlohmann::ordered_json j;
  j["node_count"] = r.node_count;
  j["edge_count"] = r.edge_count;
  j["threshold"] = g.threshold;
  j["component_count"] = r.component_count;
  j["largest_component_size"] = r.largest_component_size;
  auto deg = nlohmann::ordered_json::object();
  for (std::size_t u = 0; u < r.node_count; ++u) deg[g.nodes[u]] = r.degree[u];
  j["degree"] = std::move(deg);
  auto comps = nlohmann::ordered_json::array();
  for (const auto& c : r.components) {
    auto names = nlohmann::ordered_json::array();
    for (auto u : c) names.push_back(g.nodes[u]);
    comps.push_back(std::move(names));
  }
  j["components"] = std::move(comps);
  auto iso = nlohmann::ordered_json::array();
  for (auto u : r.isolated) iso.push_back(g.nodes[u]);
  j["isolated"] = std::move(iso);
  auto hubs = nlohmann::ordered_json::array();
  for (auto u : r.hubs) hubs.push_back({{"node", g.nodes[u]}, {"degree", r.degree[u]}});
  j["hubs"] = std::move(hubs);
  return j;
}

// ---- serialization ---------------------------------------------------------

enum class GraphFormat { Json, Dot, EdgeCsv };

// {"nodes": [...], "threshold": x, "edges": [{"i": name, "j": name, "w": s}]}
inline std::string graph_to_json(const SimilarityGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = g.nodes;
  j["threshold"] = g.threshold;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"i", g.nodes[e.i]}, {"j", g.nodes[e.j]}, {"w", e.weight}});
  j["edges"] = std::move(edges);
  return j.dump(2) + "\n";
}

namespace detail {

inline std::size_t node_index(const std::map<std::string, std::size_t>& index, const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) fail(ErrorCode::MalformedRow, "edge references unknown node " + name);
  return it->second;
}

inline Edge canonical_edge(std::size_t a, std::size_t b, double w) {
  if (a == b) fail(ErrorCode::MalformedRow, "self-loop in graph document");
  return a < b ? Edge{a, b, w} : Edge{b, a, w};
}

inline void finish_graph(SimilarityGraph& g) {
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
  for (std::size_t k = 1; k < g.edges.size(); ++k)
    if (g.edges[k].i == g.edges[k - 1].i && g.edges[k].j == g.edges[k - 1].j)
      fail(ErrorCode::MalformedRow, "duplicate edge in graph document");
}

}  // namespace detail

inline SimilarityGraph graph_from_json(std::string_view text) {
  SimilarityGraph g;
  try {
    const auto j = nlohmann::json::parse(text);
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    g.threshold = j.at("threshold").get<double>();
    std::map<std::string, std::size_t> index;
    for (std::size_t u = 0; u < g.nodes.size(); ++u) index[g.nodes[u]] = u;
    for (const auto& e : j.at("edges")) {
      g.edges.push_back(detail::canonical_edge(detail::node_index(index, e.at("i").get<std::string>()),
                                               detail::node_index(index, e.at("j").get<std::string>()),
                                               e.at("w").get<double>()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedRow, std::string("graph JSON: ") + e.what());
  }
  detail::finish_graph(g);
  return g;
}

// Undirected DOT; node order and edge order follow the graph.
inline std::string graph_to_dot(const SimilarityGraph& g) {
  std::string out = "graph similarity {\n";
  out += "  graph [threshold=\"" + io::format_double(g.threshold) + "\"];\n";
  for (const auto& n : g.nodes) out += "  \"" + n + "\";\n";
  for (const auto& e : g.edges)
    out += "  \"" + g.nodes[e.i] + "\" -- \"" + g.nodes[e.j] + "\" [weight=" +
           io::format_double(e.weight) + "];\n";
  out += "}\n";
  return out;
}

// i,j,weight with node names. Isolated nodes are not representable, so the
// importer takes the node universe separately.
inline std::string graph_to_edge_csv(const SimilarityGraph& g) {
  std::string out = "i,j,weight\n";
  for (const auto& e : g.edges)
    out += g.nodes[e.i] + ',' + g.nodes[e.j] + ',' + io::format_double(e.weight) + '\n';
  return out;
}

inline SimilarityGraph graph_from_edge_csv(std::string_view text, std::vector<std::string> nodes,
                                           double threshold) {
  SimilarityGraph g{std::move(nodes), {}, threshold};
  std::map<std::string, std::size_t> index;
  for (std::size_t u = 0; u < g.nodes.size(); ++u) index[g.nodes[u]] = u;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "i,j,weight") fail(ErrorCode::MalformedRow, "edge CSV: bad header");
      continue;
    }
    const auto f = io::split(line);
    const auto w = f.size() == 3 ? io::parse_double(f[2]) : std::nullopt;
    if (!w) fail(ErrorCode::MalformedRow, "edge CSV line " + std::to_string(line_no));
    g.edges.push_back(detail::canonical_edge(detail::node_index(index, std::string(f[0])),
                                             detail::node_index(index, std::string(f[1])), *w));
  }
  detail::finish_graph(g);
  return g;
}

inline std::string export_graph(const SimilarityGraph& g, GraphFormat format) {
  switch (format) {
    case GraphFormat::Json: return graph_to_json(g);
    case GraphFormat::Dot: return graph_to_dot(g);
    case GraphFormat::EdgeCsv: return graph_to_edge_csv(g);
  }
  return {};
}

inline void export_graph(const SimilarityGraph& g, GraphFormat format,
                         const std::filesystem::path& path) {
  io::write_file(path, export_graph(g, format));
}

}  // namespace latsim

#endif  // LATSIM_GRAPH_HPP_
