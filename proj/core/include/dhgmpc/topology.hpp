#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dhgmpc {

enum class VertexClass { kJunction, kTesHot, kTesCold };
enum class EdgeClass { kPipe, kProducerHx, kConsumerHx };

std::string_view to_string(VertexClass cls);
std::string_view to_string(EdgeClass cls);
VertexClass parse_vertex_class(std::string_view text);
EdgeClass parse_edge_class(std::string_view text);

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vertex {
  std::string id;
  VertexClass cls = VertexClass::kJunction;
  std::string tes;  // storage id, empty for junctions

  bool operator==(const Vertex&) const = default;
};

struct Edge {
  std::string id;
  EdgeClass cls = EdgeClass::kPipe;
  std::string source;
  std::string target;

  bool operator==(const Edge&) const = default;
};

/// Directed multigraph of a district heating grid.
///
/// Construction validates the structural invariants: unique ids, no self
/// loops, weak connectivity, and exactly one hot and one cold vertex per
/// storage. Edges that join the two layers of the same storage are rejected
/// because they collapse into self loops once the storage is merged.
class DhgGraph {
 public:
  DhgGraph() = default;
  DhgGraph(std::vector<Vertex> vertices, std::vector<Edge> edges);

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  int vertex_index(std::string_view id) const;
  int edge_index(std::string_view id) const;
  int source(int edge) const { return sources_[edge]; }
  int target(int edge) const { return targets_[edge]; }

  std::vector<int> vertices_of(VertexClass cls) const;
  std::vector<int> edges_of(EdgeClass cls) const;

  // Storages are ordered by the position of their hot vertex.
  const std::vector<std::string>& tes_ids() const { return tes_ids_; }
  int num_tes() const { return static_cast<int>(tes_ids_.size()); }
  int hot_vertex(int tes) const { return hot_of_tes_[tes]; }
  int cold_vertex(int tes) const { return cold_of_tes_[tes]; }

  bool operator==(const DhgGraph& other) const {
    return vertices_ == other.vertices_ && edges_ == other.edges_;
  }

 private:
  void index();

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<int> sources_;
  std::vector<int> targets_;
  std::vector<std::string> tes_ids_;
  std::vector<int> hot_of_tes_;
  std::vector<int> cold_of_tes_;
};

/// Vertex-edge incidence matrix: +1 where an edge enters a vertex, -1 where
/// it leaves.
Eigen::MatrixXi build_incidence(const DhgGraph& graph);

struct ReducedGraph {
  DhgGraph graph;
  std::vector<int> vertex_map;  // original vertex index -> reduced index
};

/// Merges the hot and cold vertex of every storage into a single vertex.
/// Merged vertices are labelled "<hot>+<cold>" and classed as junctions.
ReducedGraph reduce_graph(const DhgGraph& graph);

struct CycleBasis {
  std::vector<int> tree_edges;
  std::vector<int> chords;
  Eigen::MatrixXi cycles;  // |chords| x |E|, fundamental cycle matrix
};

/// Breadth-first spanning tree rooted at vertex 0, neighbours visited in
/// ascending edge order. Each chord closes one fundamental cycle oriented
/// along the chord.
CycleBasis spanning_tree_and_chords(const DhgGraph& graph);

struct StructureCheck {
  bool satisfied = false;
  int rank = 0;
  double rank_tolerance = 0.0;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd hot_cycle_map;  // (B)_{V_h} F^T
  Eigen::MatrixXd right_inverse;  // W with (B)_{V_h} F^T W = I
  double inverse_residual = 0.0;
  std::vector<int> uncovered_hot_rows;  // rows of (B)_{V_h} F^T that vanish
};

/// Checks that (B)_{V_h} F^T has full row rank. Singular values below
/// 1e-9 times the largest count as zero.
StructureCheck check_stabilizability_structure(const Eigen::MatrixXi& incidence,
                                               const Eigen::MatrixXi& cycles,
                                               const std::vector<int>& hot_rows);

/// Everything the model needs from the graph, computed once.
struct Network {
  DhgGraph graph;
  Eigen::MatrixXi incidence;
  ReducedGraph reduced;
  CycleBasis basis;
  std::vector<int> hot;
  std::vector<int> cold;  // cold[i] pairs with hot[i]
  std::vector<int> junctions;
  std::vector<int> producers;
  std::vector<int> consumers;

  int num_chords() const { return static_cast<int>(basis.chords.size()); }
};

Network analyze_network(DhgGraph graph);

}  // namespace dhgmpc
