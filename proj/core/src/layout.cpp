//===- layout.cpp - Sugiyama pipeline and force-directed layout -----------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "spire/error.hpp"

namespace spire::layout {

void AbstractGraph::add_node(NodeId id, std::string label, Size size) {
  if (auto it = index_.find(id); it != index_.end()) {
    nodes_[it->second].label = std::move(label);
    nodes_[it->second].size = size;
    return;
  }
  index_.emplace(id, nodes_.size());
  nodes_.push_back({id, std::move(label), size});
}

void AbstractGraph::add_edge(NodeId source, NodeId target) {
  if (!contains(source) || !contains(target))
    throw std::invalid_argument("edge endpoint is not a node of the graph");
  auto key = std::make_pair(source, target);
  if (auto it = edge_index_.find(key); it != edge_index_.end()) {
    ++edges_[it->second].multiplicity;
    return;
  }
  edge_index_.emplace(key, edges_.size());
  edges_.push_back({source, target, 1});
}

AcyclicGraph remove_cycles(const AbstractGraph& g) {
  AcyclicGraph out;
  out.nodes = g.nodes();

  std::map<NodeId, std::vector<std::size_t>> out_edges;  // node -> edge indices
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const GraphEdge& e = g.edges()[i];
    if (e.source == e.target)
      continue;
    out_edges[e.source].push_back(i);
  }
  for (auto& [node, list] : out_edges)
    std::stable_sort(list.begin(), list.end(),
                     [&](std::size_t a, std::size_t b) { return g.edges()[a].target < g.edges()[b].target; });

  enum class Mark { White, OnStack, Done };
  std::map<NodeId, Mark> mark;
  for (const auto& n : g.nodes())
    mark[n.id] = Mark::White;
  std::vector<bool> reversed(g.edges().size(), false);

  struct Frame {
    NodeId node;
    std::size_t next = 0;
  };
  for (auto& [root, root_mark] : mark) {  // std::map: ascending id
    if (root_mark != Mark::White)
      continue;
    std::vector<Frame> stack{{root}};
    root_mark = Mark::OnStack;
    while (!stack.empty()) {
      Frame& top = stack.back();
      const auto& edges = out_edges[top.node];
      if (top.next == edges.size()) {
        mark[top.node] = Mark::Done;
        stack.pop_back();
        continue;
      }
      const std::size_t ei = edges[top.next++];
      const NodeId t = g.edges()[ei].target;
      if (mark[t] == Mark::OnStack) {
        reversed[ei] = true;
      } else if (mark[t] == Mark::White) {
        mark[t] = Mark::OnStack;
        stack.push_back({t});
      }
    }
  }

  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    const GraphEdge& e = g.edges()[i];
    if (e.source == e.target) {
      out.self_loops.push_back(e);
      continue;
    }
    if (reversed[i])
      out.edges.push_back({e.target, e.source, e.multiplicity, true});
    else
      out.edges.push_back({e.source, e.target, e.multiplicity, false});
  }
  return out;
}

std::vector<GraphEdge> reversed_edges(const AcyclicGraph& g) {
  std::vector<GraphEdge> out;
  for (const auto& e : g.edges)
    if (e.reversed)
      out.push_back({e.target, e.source, e.multiplicity});
  return out;
}

AbstractGraph restore_orientation(const AcyclicGraph& g) {
  // Edge order is the acyclic graph's with self-loops appended, so compare
  // the result with the input as an edge set.
  AbstractGraph out;
  for (const auto& n : g.nodes)
    out.add_node(n.id, n.label, n.size);
  auto add = [&](NodeId s, NodeId t, std::uint32_t m) {
    for (std::uint32_t i = 0; i < m; ++i)
      out.add_edge(s, t);
  };
  for (const auto& e : g.edges) {
    if (e.reversed)
      add(e.target, e.source, e.multiplicity);
    else
      add(e.source, e.target, e.multiplicity);
  }
  for (const auto& e : g.self_loops)
    add(e.source, e.target, e.multiplicity);
  return out;
}

std::map<NodeId, int> assign_layers(const AcyclicGraph& g) {
  std::map<NodeId, int> layer;
  std::map<NodeId, int> indegree;
  std::map<NodeId, std::vector<NodeId>> succ;
  for (const auto& n : g.nodes) {
    layer[n.id] = 0;
    indegree[n.id] = 0;
  }
  for (const auto& e : g.edges) {
    succ[e.source].push_back(e.target);
    ++indegree[e.target];
  }
  std::vector<NodeId> ready;
  for (auto& [id, d] : indegree)
    if (d == 0)
      ready.push_back(id);
  std::size_t processed = 0;
  while (!ready.empty()) {
    const NodeId u = ready.back();
    ready.pop_back();
    ++processed;
    for (NodeId v : succ[u]) {
      layer[v] = std::max(layer[v], layer[u] + 1);
      if (--indegree[v] == 0)
        ready.push_back(v);
    }
  }
  if (processed != g.nodes.size())
    throw Error(ErrorCode::CycleDetected, "graph passed to layer assignment contains a cycle");
  return layer;
}

std::size_t count_crossings(const std::vector<std::vector<std::size_t>>& order,
                            const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> where;  // vertex -> (layer, position)
  for (std::size_t l = 0; l < order.size(); ++l)
    for (std::size_t p = 0; p < order[l].size(); ++p)
      where[order[l][p]] = {l, p};

  // Group edges by their upper layer; only edges between the same pair of
  // adjacent layers can cross.
  std::map<std::size_t, std::vector<std::pair<std::size_t, std::size_t>>> by_layer;
  for (auto [u, v] : edges) {
    auto [lu, pu] = where.at(u);
    auto [lv, pv] = where.at(v);
    if (lu > lv) {
      std::swap(lu, lv);
      std::swap(pu, pv);
    }
    by_layer[lu].push_back({pu, pv});
  }
  std::size_t crossings = 0;
  for (const auto& [l, list] : by_layer)
    for (std::size_t i = 0; i < list.size(); ++i)
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        const auto [a1, b1] = list[i];
        const auto [a2, b2] = list[j];
        if ((a1 < a2 && b1 > b2) || (a1 > a2 && b1 < b2))
          ++crossings;
      }
  return crossings;
}

namespace {

// Reorders one layer by the barycenter of each vertex's neighbours in the
// reference layer. Vertices with no such neighbours stay in their slots.
void barycenter_pass(std::vector<std::size_t>& layer, const std::vector<std::vector<std::size_t>>& neighbours,
                     const std::vector<double>& ref_position) {
  std::vector<bool> fixed(layer.size());
  std::vector<std::pair<double, std::size_t>> movable;
  for (std::size_t i = 0; i < layer.size(); ++i) {
    const auto& ns = neighbours[layer[i]];
    if (ns.empty()) {
      fixed[i] = true;
      continue;
    }
    double sum = 0;
    for (std::size_t n : ns)
      sum += ref_position[n];
    movable.push_back({sum / static_cast<double>(ns.size()), layer[i]});
  }
  std::stable_sort(movable.begin(), movable.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t next = 0;
  for (std::size_t i = 0; i < layer.size(); ++i)
    if (!fixed[i])
      layer[i] = movable[next++].second;
}

}  // namespace

ProperGraph order_layers(const AcyclicGraph& g, const std::map<NodeId, int>& layers, int rounds) {
  ProperGraph pg;
  std::map<NodeId, std::size_t> vertex_of;
  int max_layer = -1;
  for (const auto& n : g.nodes) {
    const int l = layers.at(n.id);
    vertex_of[n.id] = pg.vertices.size();
    pg.vertices.push_back({n.id, l, n.size, 0});
    max_layer = std::max(max_layer, l);
  }
  for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
    const auto& e = g.edges[ei];
    const int ls = layers.at(e.source);
    const int lt = layers.at(e.target);
    std::vector<std::size_t> chain{vertex_of.at(e.source)};
    for (int l = ls + 1; l < lt; ++l) {
      chain.push_back(pg.vertices.size());
      pg.vertices.push_back({std::nullopt, l, {}, ei});
    }
    chain.push_back(vertex_of.at(e.target));
    for (std::size_t i = 0; i + 1 < chain.size(); ++i)
      pg.edges.push_back({chain[i], chain[i + 1]});
    pg.chains.push_back(std::move(chain));
  }

  pg.order.assign(static_cast<std::size_t>(max_layer + 1), {});
  {
    std::vector<std::size_t> real;
    for (std::size_t v = 0; v < pg.vertices.size(); ++v)
      if (pg.vertices[v].node)
        real.push_back(v);
    std::stable_sort(real.begin(), real.end(),
                     [&](std::size_t a, std::size_t b) { return *pg.vertices[a].node < *pg.vertices[b].node; });
    for (std::size_t v : real)
      pg.order[pg.vertices[v].layer].push_back(v);
    for (std::size_t v = 0; v < pg.vertices.size(); ++v)
      if (!pg.vertices[v].node)
        pg.order[pg.vertices[v].layer].push_back(v);
  }

  std::vector<std::vector<std::size_t>> upper(pg.vertices.size()), lower(pg.vertices.size());
  for (auto [u, v] : pg.edges) {
    lower[u].push_back(v);
    upper[v].push_back(u);
  }

  std::size_t best = count_crossings(pg.order, pg.edges);
  pg.crossing_history.push_back(best);
  std::vector<double> position(pg.vertices.size());
  auto refresh = [&](const std::vector<std::size_t>& layer) {
    for (std::size_t p = 0; p < layer.size(); ++p)
      position[layer[p]] = static_cast<double>(p);
  };

  for (int round = 0; round < rounds && best > 0; ++round) {
    auto candidate = pg.order;
    for (const auto& layer : candidate)
      refresh(layer);
    for (std::size_t l = 1; l < candidate.size(); ++l) {
      barycenter_pass(candidate[l], upper, position);
      refresh(candidate[l]);
    }
    for (std::size_t l = candidate.size() >= 2 ? candidate.size() - 1 : 0; l-- > 0;) {
      barycenter_pass(candidate[l], lower, position);
      refresh(candidate[l]);
    }
    const std::size_t c = count_crossings(candidate, pg.edges);
    if (c > best)
      break;
    const bool unchanged = candidate == pg.order;
    pg.order = std::move(candidate);
    best = c;
    pg.crossing_history.push_back(c);
    if (unchanged)
      break;
  }
  return pg;
}

LaidOutGraph assign_coordinates(const AcyclicGraph& g, const ProperGraph& pg, const Spacing& spacing) {
  LaidOutGraph out;
  out.algorithm = Algorithm::Sugiyama;
  for (const auto& e : g.self_loops)
    out.self_loops.push_back(e.source);
  out.reversed = reversed_edges(g);

  std::vector<double> layer_width(pg.order.size(), 0);
  double widest = 0;
  for (std::size_t l = 0; l < pg.order.size(); ++l) {
    double w = 0;
    for (std::size_t v : pg.order[l])
      w += pg.vertices[v].size.w;
    if (!pg.order[l].empty())
      w += spacing.node_gap * static_cast<double>(pg.order[l].size() - 1);
    layer_width[l] = w;
    widest = std::max(widest, w);
  }

  std::vector<Point> top_left(pg.vertices.size());
  for (std::size_t l = 0; l < pg.order.size(); ++l) {
    double x = (widest - layer_width[l]) / 2;
    const double y = static_cast<double>(l) * spacing.layer_gap;
    for (std::size_t v : pg.order[l]) {
      top_left[v] = {x, y};
      x += pg.vertices[v].size.w + spacing.node_gap;
    }
  }

  std::map<NodeId, std::size_t> vertex_of;
  for (std::size_t v = 0; v < pg.vertices.size(); ++v)
    if (pg.vertices[v].node)
      vertex_of[*pg.vertices[v].node] = v;

  for (const auto& n : g.nodes) {
    const std::size_t v = vertex_of.at(n.id);
    const Point p = top_left[v];
    out.nodes.push_back({n.id, n.label, p.x, p.y, n.size, pg.vertices[v].layer});
    out.width = std::max(out.width, p.x + n.size.w);
    out.height = std::max(out.height, p.y + n.size.h);
  }
  out.width = std::max(out.width, widest);

  for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
    const auto& e = g.edges[ei];
    const auto& chain = pg.chains[ei];
    EdgeRoute route;
    route.multiplicity = e.multiplicity;
    const auto& src = pg.vertices[chain.front()];
    const auto& dst = pg.vertices[chain.back()];
    route.points.push_back({top_left[chain.front()].x + src.size.w / 2, top_left[chain.front()].y + src.size.h});
    for (std::size_t i = 1; i + 1 < chain.size(); ++i)
      route.points.push_back(top_left[chain[i]]);
    route.points.push_back({top_left[chain.back()].x + dst.size.w / 2, top_left[chain.back()].y});
    if (e.reversed) {
      std::reverse(route.points.begin(), route.points.end());
      route.source = e.target;
      route.target = e.source;
    } else {
      route.source = e.source;
      route.target = e.target;
    }
    out.edge_routes.push_back(std::move(route));
  }
  out.crossings = count_crossings(pg.order, pg.edges);
  return out;
}

LaidOutGraph layout_sugiyama(const AbstractGraph& g, const Spacing& spacing) {
  const AcyclicGraph acyclic = remove_cycles(g);
  const auto layers = assign_layers(acyclic);
  const ProperGraph proper = order_layers(acyclic, layers);
  return assign_coordinates(acyclic, proper, spacing);
}

double unit_interval(std::uint64_t draw) noexcept {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

LaidOutGraph layout_force(const AbstractGraph& g, const ForceParams& params) {
  if (params.iterations < 1)
    throw std::invalid_argument("force layout needs at least one iteration");
  LaidOutGraph out;
  out.algorithm = Algorithm::ForceDirected;
  const std::size_t n = g.nodes().size();
  if (n == 0)
    return out;

  const double area = params.area > 0 ? params.area : 10000.0 * static_cast<double>(n);
  const double side = std::sqrt(area);
  const double k = std::sqrt(area / static_cast<double>(n));
  const double t0 = 0.1 * side;

  std::mt19937_64 rng(params.seed);
  std::vector<Point> pos(n);
  for (auto& p : pos) {
    p.x = unit_interval(rng()) * side;
    p.y = unit_interval(rng()) * side;
  }

  std::map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    index[g.nodes()[i].id] = i;
  std::vector<std::pair<std::size_t, std::size_t>> springs;
  for (const auto& e : g.edges())
    if (e.source != e.target)
      springs.push_back({index.at(e.source), index.at(e.target)});

  // Coincident points get a fixed nudge so the update stays deterministic.
  constexpr double kMinDistance = 1e-6;
  auto separation = [&](std::size_t i, std::size_t j, double& dx, double& dy) {
    dx = pos[i].x - pos[j].x;
    dy = pos[i].y - pos[j].y;
    double d = std::hypot(dx, dy);
    if (d < kMinDistance) {
      dx = kMinDistance;
      dy = 0;
      d = kMinDistance;
    }
    return d;
  };

  std::vector<Point> disp(n);
  for (int it = 0; it < params.iterations; ++it) {
    const double temperature = t0 * (1.0 - static_cast<double>(it) / params.iterations);
    std::fill(disp.begin(), disp.end(), Point{});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx, dy;
        const double d = separation(i, j, dx, dy);
        const double f = k * k / d;
        disp[i].x += dx / d * f;
        disp[i].y += dy / d * f;
        disp[j].x -= dx / d * f;
        disp[j].y -= dy / d * f;
      }
    for (auto [s, t] : springs) {
      double dx, dy;
      const double d = separation(s, t, dx, dy);
      const double f = d * d / k;
      disp[s].x -= dx / d * f;
      disp[s].y -= dy / d * f;
      disp[t].x += dx / d * f;
      disp[t].y += dy / d * f;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double len = std::hypot(disp[i].x, disp[i].y);
      if (len > 0) {
        const double step = std::min(len, temperature);
        pos[i].x += disp[i].x / len * step;
        pos[i].y += disp[i].y / len * step;
      }
      pos[i].x = std::clamp(pos[i].x, 0.0, side);
      pos[i].y = std::clamp(pos[i].y, 0.0, side);
    }
  }

  out.width = side;
  out.height = side;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = g.nodes()[i];
    out.nodes.push_back({node.id, node.label, pos[i].x, pos[i].y, node.size, std::nullopt});
  }
  for (const auto& e : g.edges()) {
    if (e.source == e.target) {
      out.self_loops.push_back(e.source);
      continue;
    }
    out.edge_routes.push_back({e.source, e.target, e.multiplicity, {pos[index.at(e.source)], pos[index.at(e.target)]}});
  }
  return out;
}

}  // namespace spire::layout
