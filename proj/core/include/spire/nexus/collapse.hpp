//===- spire/nexus/collapse.hpp - Dominator-based graph collapsing -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "spire/layout.hpp"

namespace spire::nexus {

using layout::AbstractGraph;
using layout::NodeId;

/// Immediate dominators over a virtual root that points at every node
/// without predecessors (and, failing that, at the smallest id of each
/// otherwise unreachable region). nullopt means "dominated only by the root".
std::map<NodeId, std::optional<NodeId>> immediate_dominators(const AbstractGraph& g);

struct CollapsedGroup {
  NodeId representative = 0;
  std::vector<NodeId> absorbed;  // strict dominatees, ascending
};

struct CollapseResult {
  AbstractGraph graph;
  std::vector<CollapsedGroup> groups;  // one per effective collapsed node
  std::map<NodeId, NodeId> representative;
};

/// Quotient graph: every node in `collapsed` absorbs its strict dominatees.
/// A collapsed node inside another collapsed node's region is absorbed by
/// the outer one. Edges between groups merge (multiplicities add); edges
/// inside a group vanish, except an original self-loop. Unknown ids in
/// `collapsed` are ignored.
CollapseResult collapse_graph(const AbstractGraph& g, const std::set<NodeId>& collapsed);

}  // namespace spire::nexus
