//===- serialize.cpp ------------------------------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/serialize.hpp"

namespace spire {

std::string_view to_string(x86::FlowKind kind) noexcept {
  switch (kind) {
    case x86::FlowKind::Sequential: return "Sequential";
    case x86::FlowKind::Call: return "Call";
    case x86::FlowKind::JumpUncond: return "JumpUncond";
    case x86::FlowKind::JumpCond: return "JumpCond";
    case x86::FlowKind::Return: return "Return";
    case x86::FlowKind::Halt: return "Halt";
  }
  return "Sequential";
}

std::string_view to_string(EdgeKind kind) noexcept {
  switch (kind) {
    case EdgeKind::FallThrough: return "FallThrough";
    case EdgeKind::Taken: return "Taken";
    case EdgeKind::Uncond: return "Uncond";
  }
  return "FallThrough";
}

std::string_view to_string(NameOrigin origin) noexcept {
  switch (origin) {
    case NameOrigin::Symbol: return "Symbol";
    case NameOrigin::Heuristic: return "Heuristic";
    case NameOrigin::UserRename: return "UserRename";
  }
  return "Heuristic";
}

Json to_json(const BinaryArtifact& a) {
  return Json{{"id", a.id},
              {"file_name", a.file_name},
              {"size_bytes", a.size_bytes},
              {"format", "Elf64"},
              {"ingest_time", a.ingest_time},
              {"warnings", a.warnings}};
}

BinaryArtifact artifact_from_json(const Json& j) {
  BinaryArtifact a;
  a.id = j.at("id").get<std::string>();
  a.file_name = j.at("file_name").get<std::string>();
  a.size_bytes = j.at("size_bytes").get<std::uint64_t>();
  a.format = BinaryFormat::Elf64;
  a.ingest_time = j.at("ingest_time").get<std::string>();
  a.warnings = j.value("warnings", std::vector<std::string>{});
  return a;
}

Json to_json(const ElfHeaderInfo& h) {
  const char* type = "Other";
  switch (h.object_type) {
    case ObjectType::Exec: type = "Exec"; break;
    case ObjectType::Dyn: type = "Dyn"; break;
    case ObjectType::Rel: type = "Rel"; break;
    case ObjectType::Other: break;
  }
  return Json{{"class", "Elf64"},
              {"endianness", h.endianness == Endianness::Little ? "Little" : "Big"},
              {"object_type", type},
              {"object_type_code", h.object_type_code},
              {"machine", h.machine},
              {"machine_name", h.machine_name},
              {"entry_point", hex_address(h.entry_point)},
              {"section_count", h.section_count},
              {"program_header_count", h.program_header_count}};
}

Json to_json(const Section& s) {
  return Json{{"name", s.name},
              {"virtual_address", hex_address(s.virtual_address)},
              {"file_offset", s.file_offset},
              {"size", s.size},
              {"flags", {{"executable", s.flags.executable}, {"writable", s.flags.writable},
                         {"allocated", s.flags.allocated}}}};
}

Json to_json(const SymbolEntry& s) {
  const char* kind = s.kind == SymbolKind::Func ? "Func" : s.kind == SymbolKind::Object ? "Object" : "Other";
  const char* binding = s.binding == SymbolBinding::Global ? "Global"
                        : s.binding == SymbolBinding::Weak ? "Weak"
                                                           : "Local";
  return Json{{"name", s.name},
              {"value", hex_address(s.value)},
              {"size", s.size},
              {"kind", kind},
              {"binding", binding},
              {"source", s.source == SymbolSource::Symtab ? "Symtab" : "Dynsym"},
              {"defined", s.defined}};
}

Json to_json(const ExtractedString& s) {
  return Json{{"text", s.text},
              {"file_offset", s.file_offset},
              {"section_name", s.section_name ? Json(*s.section_name) : Json(nullptr)},
              {"length", s.length()}};
}

Json to_json(const x86::Operand& op) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, x86::Register>) {
          return Json{{"kind", "Register"}, {"name", v.name()}};
        } else if constexpr (std::is_same_v<T, x86::Immediate>) {
          return Json{{"kind", "Immediate"}, {"value", v.value}};
        } else {
          return Json{{"kind", "Memory"},
                      {"base", v.base ? Json(v.base->name()) : Json(nullptr)},
                      {"index", v.index ? Json(v.index->name()) : Json(nullptr)},
                      {"scale", v.scale},
                      {"displacement", v.displacement},
                      {"rip_relative", v.rip_relative}};
        }
      },
      op);
}

Json to_json(const x86::Instruction& insn) {
  Json ops = Json::array();
  for (const auto& op : insn.operands)
    ops.push_back(to_json(op));
  Json flow{{"kind", to_string(insn.flow.kind)}};
  if (insn.flow.target)
    flow["target"] = hex_address(*insn.flow.target);
  return Json{{"address", hex_address(insn.address)},
              {"length", insn.length},
              {"mnemonic", insn.mnemonic},
              {"operands", std::move(ops)},
              {"flow", std::move(flow)},
              {"bytes", to_hex(insn.raw_bytes)},
              {"text", x86::render(insn)}};
}

Json to_json(const DecodedRegion& region) {
  Json insns = Json::array();
  for (const auto& insn : region.instructions)
    insns.push_back(to_json(insn));
  Json gaps = Json::array();
  for (const auto& g : region.gaps)
    gaps.push_back({{"address", hex_address(g.address)}, {"byte", g.byte}});
  return Json{{"start", hex_address(region.start)}, {"instructions", std::move(insns)}, {"gaps", std::move(gaps)}};
}

Json to_json(const BasicBlock& b) {
  Json insns = Json::array();
  for (const auto& insn : b.instructions)
    insns.push_back(to_json(insn));
  Json succ = Json::array();
  for (const auto& s : b.successors)
    succ.push_back({{"target", hex_address(s.target)}, {"kind", to_string(s.kind)}});
  return Json{{"start", hex_address(b.start)},
              {"end", hex_address(b.end())},
              {"instructions", std::move(insns)},
              {"successors", std::move(succ)},
              {"tail_call", b.tail_call ? Json(hex_address(*b.tail_call)) : Json(nullptr)}};
}

namespace {

Json capability_list(const FunctionRecord& fn) {
  Json tags = Json::array();
  for (const auto& t : fn.capabilities) {
    Json ev = Json::array();
    for (const auto& e : t.evidence)
      ev.push_back({{"callee", e.callee}, {"site", hex_address(e.site)}});
    tags.push_back({{"tag", t.tag}, {"evidence", std::move(ev)}});
  }
  return tags;
}

}  // namespace

Json function_summary_json(const FunctionRecord& fn) {
  return Json{{"id", fn.id},
              {"entry", hex_address(fn.entry)},
              {"name", fn.name},
              {"name_origin", to_string(fn.name_origin)},
              {"block_count", fn.blocks.size()},
              {"instruction_count", fn.instruction_count()},
              {"capabilities", capability_list(fn)},
              {"import", fn.import_name ? Json(*fn.import_name) : Json(nullptr)}};
}

Json function_cfg_json(const FunctionRecord& fn) {
  Json j = function_summary_json(fn);
  Json blocks = Json::array();
  for (const auto& b : fn.blocks)
    blocks.push_back(to_json(b));
  j["blocks"] = std::move(blocks);
  return j;
}

Json call_graph_json(const ProgramModel& model) {
  Json nodes = Json::array();
  for (FunctionId id : model.call_graph.nodes) {
    const auto& f = model.functions[id];
    nodes.push_back({{"id", id}, {"name", f.name}, {"entry", hex_address(f.entry)}});
  }
  Json edges = Json::array();
  for (const auto& e : model.call_graph.edges)
    edges.push_back({{"caller", e.caller}, {"callee", e.callee}, {"site", hex_address(e.site)}, {"tail", e.tail}});
  Json unresolved = Json::array();
  for (const auto& u : model.call_graph.unresolved)
    unresolved.push_back({{"caller", u.caller}, {"site", hex_address(u.site)}});
  return Json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"unresolved", std::move(unresolved)}};
}

Json capabilities_json(const ProgramModel& model) {
  Json out = Json::array();
  for (const auto& f : model.functions) {
    if (f.capabilities.empty())
      continue;
    out.push_back({{"function", f.id}, {"name", f.name}, {"tags", capability_list(f)}});
  }
  return out;
}

Json to_json(const layout::LaidOutGraph& g, NodeIdStyle ids) {
  auto id_json = [ids](layout::NodeId id) { return ids == NodeIdStyle::Address ? Json(hex_address(id)) : Json(id); };
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json node{{"id", id_json(n.id)}, {"label", n.label}, {"x", n.x},
              {"y", n.y},           {"w", n.size.w},    {"h", n.size.h}};
    if (n.layer)
      node["layer"] = *n.layer;
    nodes.push_back(std::move(node));
  }
  Json routes = Json::array();
  for (const auto& r : g.edge_routes) {
    Json pts = Json::array();
    for (const auto& p : r.points)
      pts.push_back({p.x, p.y});
    routes.push_back(
        {{"source", id_json(r.source)}, {"target", id_json(r.target)}, {"multiplicity", r.multiplicity},
         {"points", std::move(pts)}});
  }
  Json loops = Json::array();
  for (auto id : g.self_loops)
    loops.push_back(id_json(id));
  Json reversed = Json::array();
  for (const auto& e : g.reversed)
    reversed.push_back({{"source", id_json(e.source)}, {"target", id_json(e.target)}});
  Json j{{"algorithm", g.algorithm == layout::Algorithm::Sugiyama ? "sugiyama" : "force"},
         {"nodes", std::move(nodes)},
         {"edges", std::move(routes)},
         {"bounds", {{"width", g.width}, {"height", g.height}}},
         {"self_loops", std::move(loops)},
         {"reversed", std::move(reversed)}};
  if (g.crossings)
    j["crossings"] = *g.crossings;
  return j;
}

Json to_json(const InstanceMatch& m) {
  return Json{{"function", m.function}, {"address", hex_address(m.address)}, {"text", m.text}};
}

}  // namespace spire
