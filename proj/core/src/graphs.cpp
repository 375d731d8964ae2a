//===- graphs.cpp ---------------------------------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/graphs.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace spire {

namespace {

// Rough monospace metrics: 8 units per glyph, 16 per line.
constexpr double kGlyph = 8;
constexpr double kLine = 16;
constexpr double kPad = 16;

}  // namespace

layout::AbstractGraph cfg_graph(const FunctionRecord& fn) {
  layout::AbstractGraph g;
  for (const BasicBlock& b : fn.blocks) {
    std::size_t widest = fmt::format("loc_{:x}:", b.start).size();
    for (const auto& insn : b.instructions)
      widest = std::max(widest, x86::render(insn).size());
    const double h = kLine * static_cast<double>(b.instructions.size() + 1) + kPad;
    g.add_node(b.start, fmt::format("loc_{:x}", b.start), {kGlyph * static_cast<double>(widest) + kPad, h});
  }
  for (const BasicBlock& b : fn.blocks)
    for (const Successor& s : b.successors)
      g.add_edge(b.start, s.target);
  return g;
}

layout::AbstractGraph call_graph_graph(const ProgramModel& model) {
  layout::AbstractGraph g;
  for (const FunctionRecord& f : model.functions)
    g.add_node(f.id, f.name, {kGlyph * static_cast<double>(f.name.size()) + 2 * kPad, 2 * kLine + kPad});
  for (const CallEdge& e : model.call_graph.edges)
    g.add_edge(e.caller, e.callee);
  return g;
}

layout::LaidOutGraph run_layout(const layout::AbstractGraph& g, const LayoutOptions& options) {
  if (options.kind == LayoutKind::Force)
    return layout::layout_force(g, options.force);
  return layout::layout_sugiyama(g, options.spacing);
}

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\')
      out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

// Graphviz wants node centres with y growing upwards.
std::string dot_pos(const layout::PlacedNode& n, layout::Algorithm algorithm) {
  double cx = n.x;
  double cy = n.y;
  if (algorithm == layout::Algorithm::Sugiyama) {
    cx += n.size.w / 2;
    cy += n.size.h / 2;
  }
  return fmt::format("{:.2f},{:.2f}!", cx, -cy);
}

}  // namespace

std::string call_graph_dot(const ProgramModel& model, const layout::LaidOutGraph& laid) {
  std::string out = "digraph callgraph {\n  node [shape=box];\n";
  for (const auto& n : laid.nodes)
    out += fmt::format("  f{} [label=\"{}\", pos=\"{}\"];\n", n.id, dot_escape(n.label), dot_pos(n, laid.algorithm));
  for (const CallEdge& e : model.call_graph.edges)
    out += fmt::format("  f{} -> f{} [site=\"{}\"{}];\n", e.caller, e.callee, hex_address(e.site),
                       e.tail ? ", style=dashed" : "");
  out += "}\n";
  return out;
}

std::string cfg_dot(const FunctionRecord& fn, const layout::LaidOutGraph& laid) {
  std::string out = fmt::format("digraph \"{}\" {{\n  node [shape=box];\n", dot_escape(fn.name));
  for (const auto& n : laid.nodes)
    out += fmt::format("  b_{:x} [label=\"{}\", pos=\"{}\"];\n", n.id, hex_address(n.id), dot_pos(n, laid.algorithm));
  for (const BasicBlock& b : fn.blocks)
    for (const Successor& s : b.successors)
      out += fmt::format("  b_{:x} -> b_{:x} [kind=\"{}\"];\n", b.start, s.target,
                         s.kind == EdgeKind::Taken ? "taken" : s.kind == EdgeKind::Uncond ? "uncond" : "fallthrough");
  out += "}\n";
  return out;
}

}  // namespace spire
