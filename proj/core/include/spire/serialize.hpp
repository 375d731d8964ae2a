//===- spire/serialize.hpp - JSON shapes of every product ------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// All products share one JSON vocabulary so the CLI, the HTTP API and the
// on-disk cache agree byte for byte. Addresses are "0x"-prefixed lowercase
// hex strings; object keys come out sorted, so dump() is reproducible.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <json.hpp>

#include "spire/elf.hpp"
#include "spire/layout.hpp"
#include "spire/model.hpp"
#include "spire/search.hpp"
#include "spire/store.hpp"

namespace spire {

using Json = nlohmann::json;

Json to_json(const BinaryArtifact& artifact);
BinaryArtifact artifact_from_json(const Json& j);

Json to_json(const ElfHeaderInfo& header);
Json to_json(const Section& section);
Json to_json(const SymbolEntry& symbol);
Json to_json(const ExtractedString& s);

Json to_json(const x86::Operand& op);
Json to_json(const x86::Instruction& insn);
Json to_json(const DecodedRegion& region);

Json to_json(const BasicBlock& block);
/// Without blocks: the functions.json / GET /functions row.
Json function_summary_json(const FunctionRecord& fn);
/// With blocks: the cfg_<id>.json body.
Json function_cfg_json(const FunctionRecord& fn);
Json call_graph_json(const ProgramModel& model);
Json capabilities_json(const ProgramModel& model);

enum class NodeIdStyle { Integer, Address };
Json to_json(const layout::LaidOutGraph& g, NodeIdStyle ids = NodeIdStyle::Integer);

Json to_json(const InstanceMatch& m);

std::string_view to_string(x86::FlowKind kind) noexcept;
std::string_view to_string(EdgeKind kind) noexcept;
std::string_view to_string(NameOrigin origin) noexcept;

}  // namespace spire
