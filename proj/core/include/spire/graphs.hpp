//===- spire/graphs.hpp - Layout inputs from the program model -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <string>

#include "spire/layout.hpp"
#include "spire/model.hpp"

namespace spire {

/// Nodes are block start addresses; edges are intra-function successors.
layout::AbstractGraph cfg_graph(const FunctionRecord& fn);

/// Nodes are function ids labelled with the current names; one edge per
/// distinct caller/callee pair (multiplicity counts call sites).
layout::AbstractGraph call_graph_graph(const ProgramModel& model);

enum class LayoutKind { Sugiyama, Force };

struct LayoutOptions {
  LayoutKind kind = LayoutKind::Sugiyama;
  layout::Spacing spacing;
  layout::ForceParams force;
};

layout::LaidOutGraph run_layout(const layout::AbstractGraph& g, const LayoutOptions& options);

/// DOT with one `->` line per call site (tail calls dashed). Node positions
/// come from `laid` as pinned `pos` attributes in points, y pointing up.
std::string call_graph_dot(const ProgramModel& model, const layout::LaidOutGraph& laid);
/// DOT with one `->` line per CFG successor.
std::string cfg_dot(const FunctionRecord& fn, const layout::LaidOutGraph& laid);

}  // namespace spire
