//===- collapse.cpp - Dominators and quotient graphs ----------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/nexus/collapse.hpp"

#include <algorithm>

namespace spire::nexus {

namespace {

// Index 0 is the virtual root; node i of the graph is index i + 1.
struct IndexedGraph {
  std::vector<NodeId> ids;
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::vector<std::size_t>> pred;
};

IndexedGraph index_graph(const AbstractGraph& g) {
  IndexedGraph ig;
  std::map<NodeId, std::size_t> index;
  ig.ids.push_back(0);
  for (const auto& n : g.nodes()) {
    index[n.id] = ig.ids.size();
    ig.ids.push_back(n.id);
  }
  // Ascending ids keep the traversal order independent of insertion order.
  std::vector<std::size_t> order(ig.ids.size() - 1);
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i + 1;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ig.ids[a] < ig.ids[b]; });

  ig.succ.assign(ig.ids.size(), {});
  ig.pred.assign(ig.ids.size(), {});
  for (const auto& e : g.edges()) {
    const auto s = index.at(e.source);
    const auto t = index.at(e.target);
    ig.succ[s].push_back(t);
    ig.pred[t].push_back(s);
  }
  for (auto& list : ig.succ)
    std::sort(list.begin(), list.end(), [&](auto a, auto b) { return ig.ids[a] < ig.ids[b]; });

  auto link_root = [&](std::size_t v) {
    ig.succ[0].push_back(v);
    ig.pred[v].push_back(0);
  };
  for (auto v : order) {
    bool has_pred = false;
    for (auto p : ig.pred[v])
      has_pred |= p != v;
    if (!has_pred)
      link_root(v);
  }
  // Regions reachable only through cycles: root them at their smallest id.
  std::vector<bool> seen(ig.ids.size(), false);
  auto mark = [&](std::size_t v) {
    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      if (seen[u])
        continue;
      seen[u] = true;
      for (auto w : ig.succ[u])
        stack.push_back(w);
    }
  };
  mark(0);
  for (auto v : order) {
    if (!seen[v]) {
      link_root(v);
      mark(v);
    }
  }
  return ig;
}

// Cooper, Harvey and Kennedy's iterative algorithm over reverse postorder.
std::vector<std::size_t> dominator_tree(const IndexedGraph& ig) {
  const std::size_t n = ig.ids.size();
  std::vector<std::size_t> postorder;
  std::vector<std::size_t> po_number(n, 0);
  std::vector<bool> visited(n, false);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  visited[0] = true;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < ig.succ[v].size()) {
      auto w = ig.succ[v][next++];
      if (!visited[w]) {
        visited[w] = true;
        stack.push_back({w, 0});
      }
    } else {
      po_number[v] = postorder.size();
      postorder.push_back(v);
      stack.pop_back();
    }
  }

  constexpr std::size_t kUndefined = static_cast<std::size_t>(-1);
  std::vector<std::size_t> idom(n, kUndefined);
  idom[0] = 0;
  auto intersect = [&](std::size_t a, std::size_t b) {
    while (a != b) {
      while (po_number[a] < po_number[b])
        a = idom[a];
      while (po_number[b] < po_number[a])
        b = idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = postorder.rbegin(); it != postorder.rend(); ++it) {
      const auto v = *it;
      if (v == 0)
        continue;
      std::size_t candidate = kUndefined;
      for (auto p : ig.pred[v]) {
        if (idom[p] == kUndefined)
          continue;
        candidate = candidate == kUndefined ? p : intersect(p, candidate);
      }
      if (candidate != idom[v]) {
        idom[v] = candidate;
        changed = true;
      }
    }
  }
  return idom;
}

}  // namespace

std::map<NodeId, std::optional<NodeId>> immediate_dominators(const AbstractGraph& g) {
  const auto ig = index_graph(g);
  const auto idom = dominator_tree(ig);
  std::map<NodeId, std::optional<NodeId>> out;
  for (std::size_t v = 1; v < ig.ids.size(); ++v)
    out[ig.ids[v]] = idom[v] == 0 ? std::nullopt : std::optional<NodeId>(ig.ids[idom[v]]);
  return out;
}

CollapseResult collapse_graph(const AbstractGraph& g, const std::set<NodeId>& collapsed) {
  const auto idom = immediate_dominators(g);
  CollapseResult result;

  for (const auto& n : g.nodes()) {
    NodeId rep = n.id;
    for (std::optional<NodeId> v = n.id; v; v = idom.at(*v))
      if (collapsed.count(*v))
        rep = *v;  // keep climbing: the outermost collapsed dominator wins
    result.representative[n.id] = rep;
  }

  std::map<NodeId, std::vector<NodeId>> absorbed;
  for (const auto& [id, rep] : result.representative)
    if (rep != id)
      absorbed[rep].push_back(id);
  for (const auto& n : g.nodes()) {
    if (result.representative[n.id] != n.id)
      continue;
    result.graph.add_node(n.id, n.label, n.size);
  }
  for (const NodeId c : collapsed) {
    if (!g.contains(c) || result.representative[c] != c)
      continue;
    result.groups.push_back({c, absorbed[c]});
  }

  for (const auto& e : g.edges()) {
    const NodeId s = result.representative[e.source];
    const NodeId t = result.representative[e.target];
    if (s == t && e.source != e.target)
      continue;
    for (std::uint32_t i = 0; i < e.multiplicity; ++i)
      result.graph.add_edge(s, t);
  }
  return result;
}

}  // namespace spire::nexus
