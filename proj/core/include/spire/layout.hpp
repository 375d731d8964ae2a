//===- spire/layout.hpp - Layered and force-directed layout ----*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Sugiyama pipeline, one function per stage so each can be tested alone:
//
//   remove_cycles -> assign_layers -> order_layers -> assign_coordinates
//
// layout_sugiyama() runs all four. layout_force() is a Fruchterman-Reingold
// spring embedder with a seeded start and linear cooling.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spire::layout {

using NodeId = std::uint64_t;

struct Size {
  double w = 0;
  double h = 0;
  bool operator==(const Size&) const = default;
};

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

struct GraphNode {
  NodeId id = 0;
  std::string label;
  Size size;
  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  NodeId source = 0;
  NodeId target = 0;
  std::uint32_t multiplicity = 1;
  bool operator==(const GraphEdge&) const = default;
};

/// Input graph. Adding an edge that already exists bumps its multiplicity.
class AbstractGraph {
 public:
  /// Re-adding an id replaces its label and size.
  void add_node(NodeId id, std::string label = {}, Size size = {});
  /// Both endpoints must already exist; throws std::invalid_argument.
  void add_edge(NodeId source, NodeId target);

  const std::vector<GraphNode>& nodes() const noexcept { return nodes_; }
  const std::vector<GraphEdge>& edges() const noexcept { return edges_; }
  bool contains(NodeId id) const noexcept { return index_.count(id) != 0; }
  const GraphNode& node(NodeId id) const { return nodes_.at(index_.at(id)); }

  bool operator==(const AbstractGraph& other) const { return nodes_ == other.nodes_ && edges_ == other.edges_; }

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::map<NodeId, std::size_t> index_;
  std::map<std::pair<NodeId, NodeId>, std::size_t> edge_index_;
};

struct OrientedEdge {
  NodeId source = 0;  // in the acyclic orientation
  NodeId target = 0;
  std::uint32_t multiplicity = 1;
  bool reversed = false;  // original edge was target -> source
  bool operator==(const OrientedEdge&) const = default;
};

struct AcyclicGraph {
  std::vector<GraphNode> nodes;  // input order
  std::vector<OrientedEdge> edges;  // input order, self-loops removed
  std::vector<GraphEdge> self_loops;  // dropped from layout, reported here
};

/// DFS in ascending node-id order (successors also visited by ascending id);
/// each back edge is reversed.
AcyclicGraph remove_cycles(const AbstractGraph& g);

/// Original graph from an acyclic one: un-reverse edges, restore self-loops.
AbstractGraph restore_orientation(const AcyclicGraph& g);

/// The edges whose orientation remove_cycles flipped, in original direction.
std::vector<GraphEdge> reversed_edges(const AcyclicGraph& g);

/// Longest-path layering: sources at 0, others 1 + max over predecessors.
/// Throws Error(CycleDetected) if `g` has a cycle.
std::map<NodeId, int> assign_layers(const AcyclicGraph& g);

/// Layered graph with dummy vertices so every edge spans exactly one layer.
struct ProperGraph {
  struct Vertex {
    std::optional<NodeId> node;  // empty for dummies
    int layer = 0;
    Size size;                   // zero for dummies
    std::size_t edge = 0;        // owning OrientedEdge index, dummies only
  };
  std::vector<Vertex> vertices;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (upper, lower) vertex indices
  /// Per oriented edge, the vertex path from source to target.
  std::vector<std::vector<std::size_t>> chains;
  /// Per layer, vertex indices left to right.
  std::vector<std::vector<std::size_t>> order;
  /// Total crossings of the initial order, then after every accepted round.
  std::vector<std::size_t> crossing_history;
};

/// Exact crossing count between adjacent layers: two edges cross when their
/// endpoints appear in opposite relative order on the two layers.
std::size_t count_crossings(const std::vector<std::vector<std::size_t>>& order,
                            const std::vector<std::pair<std::size_t, std::size_t>>& edges);

inline constexpr int kBarycenterRounds = 4;

/// Inserts dummies, then runs up to kBarycenterRounds rounds of barycenter
/// sweeps (down then up). A round is kept only if total crossings do not
/// increase. Ties keep the current relative order; vertices without
/// neighbours in the reference layer keep their slot.
ProperGraph order_layers(const AcyclicGraph& g, const std::map<NodeId, int>& layers,
                         int rounds = kBarycenterRounds);

struct Spacing {
  double node_gap = 40;
  double layer_gap = 120;
};

enum class Algorithm { Sugiyama, ForceDirected };

struct PlacedNode {
  NodeId id = 0;
  std::string label;
  double x = 0;  // top-left corner for Sugiyama, centre for force-directed
  double y = 0;
  Size size;
  std::optional<int> layer;
  bool operator==(const PlacedNode&) const = default;
};

struct EdgeRoute {
  NodeId source = 0;  // original orientation
  NodeId target = 0;
  std::uint32_t multiplicity = 1;
  std::vector<Point> points;
  bool operator==(const EdgeRoute&) const = default;
};

struct LaidOutGraph {
  Algorithm algorithm = Algorithm::Sugiyama;
  std::vector<PlacedNode> nodes;
  std::vector<EdgeRoute> edge_routes;
  double width = 0;
  double height = 0;
  std::vector<NodeId> self_loops;
  std::vector<GraphEdge> reversed;
  std::optional<std::size_t> crossings;
  bool operator==(const LaidOutGraph&) const = default;
};

/// y = layer * layer_gap; x packs each layer left to right with node_gap
/// between vertices, centred on the widest layer. Dummy positions become
/// bend points and are not emitted as nodes.
LaidOutGraph assign_coordinates(const AcyclicGraph& g, const ProperGraph& proper, const Spacing& spacing = {});

LaidOutGraph layout_sugiyama(const AbstractGraph& g, const Spacing& spacing = {});

struct ForceParams {
  double area = 0;  // <= 0 picks 10000 per node
  int iterations = 100;
  std::uint64_t seed = 1;
};

/// k = sqrt(area / n); repulsion k^2/d between all pairs, attraction d^2/k
/// along edges; temperature falls linearly from 0.1*sqrt(area) to 0 and caps
/// each step. Start positions come from mt19937_64(seed); positions are
/// clamped to the square frame of side sqrt(area). Throws
/// std::invalid_argument when iterations < 1.
LaidOutGraph layout_force(const AbstractGraph& g, const ForceParams& params = {});

/// Uniform double in [0, 1) from one 64-bit draw (top 53 bits).
double unit_interval(std::uint64_t draw) noexcept;

}  // namespace spire::layout
