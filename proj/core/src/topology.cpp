#include "dhgmpc/topology.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>

namespace dhgmpc {

std::string_view to_string(VertexClass cls) {
  switch (cls) {
    case VertexClass::kJunction: return "junction";
    case VertexClass::kTesHot: return "tes_hot";
    case VertexClass::kTesCold: return "tes_cold";
  }
  return "?";
}

std::string_view to_string(EdgeClass cls) {
  switch (cls) {
    case EdgeClass::kPipe: return "pipe";
    case EdgeClass::kProducerHx: return "producer_hx";
    case EdgeClass::kConsumerHx: return "consumer_hx";
  }
  return "?";
}

VertexClass parse_vertex_class(std::string_view text) {
  if (text == "junction") return VertexClass::kJunction;
  if (text == "tes_hot") return VertexClass::kTesHot;
  if (text == "tes_cold") return VertexClass::kTesCold;
  throw TopologyError("unknown vertex class '" + std::string(text) + "'");
}

EdgeClass parse_edge_class(std::string_view text) {
  if (text == "pipe") return EdgeClass::kPipe;
  if (text == "producer_hx") return EdgeClass::kProducerHx;
  if (text == "consumer_hx") return EdgeClass::kConsumerHx;
  throw TopologyError("unknown edge class '" + std::string(text) + "'");
}

DhgGraph::DhgGraph(std::vector<Vertex> vertices, std::vector<Edge> edges)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
  index();
}

void DhgGraph::index() {
  if (vertices_.empty()) throw TopologyError("graph has no vertices");

  std::unordered_map<std::string, int> vertex_ids;
  for (int i = 0; i < num_vertices(); ++i) {
    const Vertex& v = vertices_[i];
    if (v.id.empty()) throw TopologyError("vertex with empty id");
    if (!vertex_ids.emplace(v.id, i).second) {
      throw TopologyError("duplicate vertex id '" + v.id + "'");
    }
  }
  std::unordered_map<std::string, int> edge_ids;
  for (int j = 0; j < num_edges(); ++j) {
    if (!edge_ids.emplace(edges_[j].id, j).second) {
      throw TopologyError("duplicate edge id '" + edges_[j].id + "'");
    }
  }

  // Storage pairing.
  std::map<std::string, std::pair<int, int>> layers;  // tes -> (hot, cold)
  for (int i = 0; i < num_vertices(); ++i) {
    const Vertex& v = vertices_[i];
    if (v.cls == VertexClass::kJunction) {
      if (!v.tes.empty()) {
        throw TopologyError("junction '" + v.id + "' carries a storage id");
      }
      continue;
    }
    if (v.tes.empty()) {
      throw TopologyError("storage vertex '" + v.id + "' has no storage id");
    }
    auto& slot = layers.try_emplace(v.tes, -1, -1).first->second;
    int& which = v.cls == VertexClass::kTesHot ? slot.first : slot.second;
    if (which != -1) {
      throw TopologyError("storage '" + v.tes + "' has more than one " +
                          std::string(to_string(v.cls)) + " vertex");
    }
    which = i;
  }
  tes_ids_.clear();
  hot_of_tes_.clear();
  cold_of_tes_.clear();
  for (int i = 0; i < num_vertices(); ++i) {
    if (vertices_[i].cls != VertexClass::kTesHot) continue;
    const auto& [hot, cold] = layers.at(vertices_[i].tes);
    if (cold == -1) {
      throw TopologyError("storage '" + vertices_[i].tes +
                          "' has no tes_cold vertex");
    }
    tes_ids_.push_back(vertices_[i].tes);
    hot_of_tes_.push_back(hot);
    cold_of_tes_.push_back(cold);
  }
  for (const auto& [tes, pair] : layers) {
    if (pair.first == -1) {
      throw TopologyError("storage '" + tes + "' has no tes_hot vertex");
    }
  }

  sources_.assign(edges_.size(), -1);
  targets_.assign(edges_.size(), -1);
  for (int j = 0; j < num_edges(); ++j) {
    const Edge& e = edges_[j];
    auto s = vertex_ids.find(e.source);
    auto t = vertex_ids.find(e.target);
    if (s == vertex_ids.end() || t == vertex_ids.end()) {
      throw TopologyError("edge '" + e.id + "' references an unknown vertex");
    }
    if (s->second == t->second) {
      throw TopologyError("edge '" + e.id + "' is a self loop");
    }
    const Vertex& vs = vertices_[s->second];
    const Vertex& vt = vertices_[t->second];
    if (!vs.tes.empty() && vs.tes == vt.tes) {
      throw TopologyError("edge '" + e.id + "' joins both layers of storage '" +
                          vs.tes + "'");
    }
    sources_[j] = s->second;
    targets_[j] = t->second;
  }

  // Weak connectivity.
  std::vector<std::vector<int>> adjacency(vertices_.size());
  for (int j = 0; j < num_edges(); ++j) {
    adjacency[sources_[j]].push_back(targets_[j]);
    adjacency[targets_[j]].push_back(sources_[j]);
  }
  std::vector<char> seen(vertices_.size(), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : adjacency[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        queue.push_back(w);
      }
    }
  }
  if (reached != num_vertices()) {
    throw TopologyError("graph is not weakly connected");
  }
}

int DhgGraph::vertex_index(std::string_view id) const {
  for (int i = 0; i < num_vertices(); ++i) {
    if (vertices_[i].id == id) return i;
  }
  throw TopologyError("unknown vertex '" + std::string(id) + "'");
}

int DhgGraph::edge_index(std::string_view id) const {
  for (int j = 0; j < num_edges(); ++j) {
    if (edges_[j].id == id) return j;
  }
  throw TopologyError("unknown edge '" + std::string(id) + "'");
}

std::vector<int> DhgGraph::vertices_of(VertexClass cls) const {
  std::vector<int> out;
  for (int i = 0; i < num_vertices(); ++i) {
    if (vertices_[i].cls == cls) out.push_back(i);
  }
  return out;
}

std::vector<int> DhgGraph::edges_of(EdgeClass cls) const {
  std::vector<int> out;
  for (int j = 0; j < num_edges(); ++j) {
    if (edges_[j].cls == cls) out.push_back(j);
  }
  return out;
}

Eigen::MatrixXi build_incidence(const DhgGraph& graph) {
  Eigen::MatrixXi b = Eigen::MatrixXi::Zero(graph.num_vertices(),
                                            graph.num_edges());
  for (int j = 0; j < graph.num_edges(); ++j) {
    b(graph.target(j), j) = 1;
    b(graph.source(j), j) = -1;
  }
  return b;
}

ReducedGraph reduce_graph(const DhgGraph& graph) {
  ReducedGraph out;
  out.vertex_map.assign(graph.num_vertices(), -1);
  std::vector<Vertex> vertices;
  std::map<std::string, int> merged;  // tes id -> reduced index
  for (int i = 0; i < graph.num_vertices(); ++i) {
    const Vertex& v = graph.vertices()[i];
    if (v.cls == VertexClass::kJunction) {
      out.vertex_map[i] = static_cast<int>(vertices.size());
      vertices.push_back(Vertex{v.id, VertexClass::kJunction, {}});
      continue;
    }
    auto it = merged.find(v.tes);
    if (it != merged.end()) {
      out.vertex_map[i] = it->second;
      continue;
    }
    int tes = static_cast<int>(std::find(graph.tes_ids().begin(),
                                         graph.tes_ids().end(), v.tes) -
                               graph.tes_ids().begin());
    const std::string label = graph.vertices()[graph.hot_vertex(tes)].id +
                              "+" + graph.vertices()[graph.cold_vertex(tes)].id;
    int index = static_cast<int>(vertices.size());
    merged.emplace(v.tes, index);
    out.vertex_map[i] = index;
    vertices.push_back(Vertex{label, VertexClass::kJunction, {}});
  }
  std::vector<Edge> edges = graph.edges();
  for (int j = 0; j < graph.num_edges(); ++j) {
    edges[j].source = vertices[out.vertex_map[graph.source(j)]].id;
    edges[j].target = vertices[out.vertex_map[graph.target(j)]].id;
  }
  out.graph = DhgGraph(std::move(vertices), std::move(edges));
  return out;
}

CycleBasis spanning_tree_and_chords(const DhgGraph& graph) {
  const int nv = graph.num_vertices();
  const int ne = graph.num_edges();

  // Incident edges per vertex in ascending edge order.
  std::vector<std::vector<int>> incident(nv);
  for (int j = 0; j < ne; ++j) {
    incident[graph.source(j)].push_back(j);
    incident[graph.target(j)].push_back(j);
  }

  std::vector<int> parent_edge(nv, -1);
  std::vector<int> parent(nv, -1);
  std::vector<int> depth(nv, -1);
  std::vector<char> in_tree(ne, 0);
  std::deque<int> queue{0};
  depth[0] = 0;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int j : incident[v]) {
      int w = graph.source(j) == v ? graph.target(j) : graph.source(j);
      if (depth[w] != -1) continue;
      depth[w] = depth[v] + 1;
      parent[w] = v;
      parent_edge[w] = j;
      in_tree[j] = 1;
      queue.push_back(w);
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (depth[v] == -1) throw TopologyError("graph is not weakly connected");
  }

  CycleBasis basis;
  for (int j = 0; j < ne; ++j) {
    (in_tree[j] ? basis.tree_edges : basis.chords).push_back(j);
  }
  basis.cycles = Eigen::MatrixXi::Zero(static_cast<int>(basis.chords.size()),
                                       ne);

  for (int i = 0; i < static_cast<int>(basis.chords.size()); ++i) {
    const int chord = basis.chords[i];
    basis.cycles(i, chord) = 1;
    // The cycle runs source -> target along the chord, then back from the
    // chord's target to its source through the tree.
    int a = graph.target(chord);
    int b = graph.source(chord);
    std::vector<std::pair<int, int>> down;  // (edge, from) on b's side
    while (a != b) {
      if (depth[a] >= depth[b]) {
        // Traverse a -> parent[a].
        int j = parent_edge[a];
        basis.cycles(i, j) += graph.source(j) == a ? 1 : -1;
        a = parent[a];
      } else {
        // The return path enters b from parent[b]: parent[b] -> b.
        int j = parent_edge[b];
        basis.cycles(i, j) += graph.source(j) == parent[b] ? 1 : -1;
        b = parent[b];
      }
    }
  }
  return basis;
}

StructureCheck check_stabilizability_structure(
    const Eigen::MatrixXi& incidence, const Eigen::MatrixXi& cycles,
    const std::vector<int>& hot_rows) {
  if (incidence.cols() != cycles.cols()) {
    throw std::invalid_argument(
        "check_stabilizability_structure: incidence and cycle matrix have "
        "different edge counts");
  }
  for (int r : hot_rows) {
    if (r < 0 || r >= incidence.rows()) {
      throw std::invalid_argument(
          "check_stabilizability_structure: hot row out of range");
    }
  }
  StructureCheck out;
  const int nh = static_cast<int>(hot_rows.size());
  const int nf = static_cast<int>(cycles.rows());
  Eigen::MatrixXd bh(nh, incidence.cols());
  for (int i = 0; i < nh; ++i) bh.row(i) = incidence.row(hot_rows[i]).cast<double>();
  out.hot_cycle_map = bh * cycles.cast<double>().transpose();

  for (int i = 0; i < nh; ++i) {
    if (out.hot_cycle_map.row(i).cwiseAbs().maxCoeff() == 0.0) {
      out.uncovered_hot_rows.push_back(i);
    }
  }
  if (nh == 0) {
    out.satisfied = true;
    out.right_inverse = Eigen::MatrixXd::Zero(nf, 0);
    return out;
  }
  if (nf == 0) {
    out.singular_values = Eigen::VectorXd::Zero(0);
    return out;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      out.hot_cycle_map, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  const double largest = out.singular_values.size() ? out.singular_values(0) : 0.0;
  out.rank_tolerance = 1e-9 * largest;
  out.rank = 0;
  for (int i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values(i) > out.rank_tolerance) ++out.rank;
  }
  out.satisfied = largest > 0.0 && out.rank == nh;
  if (out.satisfied) {
    // Moore-Penrose right inverse A^T (A A^T)^{-1}.
    const Eigen::MatrixXd& a = out.hot_cycle_map;
    Eigen::MatrixXd gram = a * a.transpose();
    out.right_inverse = a.transpose() * gram.ldlt().solve(
        Eigen::MatrixXd::Identity(nh, nh));
    out.inverse_residual =
        (a * out.right_inverse - Eigen::MatrixXd::Identity(nh, nh))
            .cwiseAbs()
            .maxCoeff();
  }
  return out;
}

Network analyze_network(DhgGraph graph) {
  Network net;
  net.graph = std::move(graph);
  net.incidence = build_incidence(net.graph);
  net.reduced = reduce_graph(net.graph);
  net.basis = spanning_tree_and_chords(net.reduced.graph);
  for (int t = 0; t < net.graph.num_tes(); ++t) {
    net.hot.push_back(net.graph.hot_vertex(t));
    net.cold.push_back(net.graph.cold_vertex(t));
  }
  net.junctions = net.graph.vertices_of(VertexClass::kJunction);
  net.producers = net.graph.edges_of(EdgeClass::kProducerHx);
  net.consumers = net.graph.edges_of(EdgeClass::kConsumerHx);
  return net;
}

}  // namespace dhgmpc
