//===- x86.cpp - Table-driven x86-64 subset decoder -----------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/x86.hpp"

#include <array>

#include <fmt/format.h>
#include <json.hpp>

namespace spire::detail {
extern const std::string_view kSubsetTableJson;
}

namespace spire::x86 {

namespace {

Encoding parse_encoding(const std::string& text) {
  static const std::array<std::pair<std::string_view, Encoding>, 10> kNames = {{
      {"ZO", Encoding::ZO}, {"O", Encoding::O}, {"OI", Encoding::OI}, {"MR", Encoding::MR},
      {"RM", Encoding::RM}, {"MI", Encoding::MI}, {"MI8", Encoding::MI8}, {"M", Encoding::M},
      {"D8", Encoding::D8}, {"D32", Encoding::D32},
  }};
  for (auto [name, enc] : kNames)
    if (name == text)
      return enc;
  throw Error(ErrorCode::Internal, fmt::format("subset table: unknown encoding '{}'", text));
}

FlowKind parse_flow(const std::string& text) {
  if (text == "seq") return FlowKind::Sequential;
  if (text == "call") return FlowKind::Call;
  if (text == "jmp") return FlowKind::JumpUncond;
  if (text == "jcc") return FlowKind::JumpCond;
  if (text == "ret") return FlowKind::Return;
  if (text == "halt") return FlowKind::Halt;
  throw Error(ErrorCode::Internal, fmt::format("subset table: unknown flow '{}'", text));
}

std::vector<SubsetRow> load_table() {
  const auto doc = nlohmann::json::parse(detail::kSubsetTableJson);
  std::vector<SubsetRow> rows;
  for (const auto& j : doc.at("rows")) {
    SubsetRow row;
    row.opcode_text = j.at("opcode").get<std::string>();
    std::string opcode = row.opcode_text;
    if (opcode.ends_with("+r")) {
      row.plus_register = true;
      opcode.resize(opcode.size() - 2);
    }
    auto bytes = from_hex(opcode);
    if (!bytes || bytes->empty() || bytes->size() > 2)
      throw Error(ErrorCode::Internal, fmt::format("subset table: bad opcode '{}'", row.opcode_text));
    row.opcode = std::move(*bytes);
    if (j.contains("ext"))
      row.extension = j.at("ext").get<std::uint8_t>();
    if (j.contains("rex_w"))
      row.rex_w = j.at("rex_w").get<std::string>() == "set";
    row.memory_only = j.value("mem_only", false);
    row.encoding = parse_encoding(j.at("encoding").get<std::string>());
    row.mnemonic = j.at("mnemonic").get<std::string>();
    row.flow = parse_flow(j.at("flow").get<std::string>());
    rows.push_back(std::move(row));
  }
  return rows;
}

// Index by first opcode byte after any 0F escape. 0F rows live in the second
// table.
struct OpcodeIndex {
  std::array<std::vector<const SubsetRow*>, 256> one_byte;
  std::array<std::vector<const SubsetRow*>, 256> two_byte;
};

const OpcodeIndex& opcode_index() {
  static const OpcodeIndex index = [] {
    OpcodeIndex idx;
    for (const SubsetRow& row : subset_table()) {
      auto& table = row.opcode.size() == 2 ? idx.two_byte : idx.one_byte;
      const std::uint8_t op = row.opcode.back();
      const int span = row.plus_register ? 8 : 1;
      for (int i = 0; i < span; ++i)
        table[op + i].push_back(&row);
    }
    return idx;
  }();
  return index;
}

bool uses_rex(Encoding enc) {
  return enc != Encoding::ZO && enc != Encoding::D8 && enc != Encoding::D32;
}

struct Cursor {
  ByteView window;
  std::size_t pos = 0;

  bool has(std::size_t n) const { return window.size() >= pos && window.size() - pos >= n; }

  template <typename T>
  T take() {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<std::make_unsigned_t<T>>(window[pos + i]) << (8 * i));
    pos += sizeof(T);
    return v;
  }
};

struct ModRm {
  std::uint8_t mod = 0;
  std::uint8_t reg = 0;  // REX.R applied
  Operand rm;
};

DecodeFailure truncated(Address address) {
  return {ErrorCode::Truncated, fmt::format("instruction at {} runs past the end of the window", hex_address(address))};
}

// Returns nullopt on truncation.
std::optional<ModRm> decode_modrm(Cursor& c, std::uint8_t rex, std::uint8_t width) {
  if (!c.has(1))
    return std::nullopt;
  const std::uint8_t byte = c.take<std::uint8_t>();
  ModRm out;
  out.mod = byte >> 6;
  out.reg = static_cast<std::uint8_t>(((byte >> 3) & 7) | ((rex & 0x4) << 1));
  const std::uint8_t rm = byte & 7;
  if (out.mod == 3) {
    out.rm = Register{static_cast<std::uint8_t>(rm | ((rex & 0x1) << 3)), width};
    return out;
  }

  MemoryOperand mem;
  mem.width = width;
  bool disp32_only = false;
  if (rm == 4) {
    if (!c.has(1))
      return std::nullopt;
    const std::uint8_t sib = c.take<std::uint8_t>();
    const std::uint8_t scale_bits = sib >> 6;
    const std::uint8_t index = static_cast<std::uint8_t>(((sib >> 3) & 7) | ((rex & 0x2) << 2));
    const std::uint8_t base = sib & 7;
    mem.scale = static_cast<std::uint8_t>(1u << scale_bits);
    if (index != 4)
      mem.index = Register{index, 64};
    if (base == 5 && out.mod == 0)
      disp32_only = true;
    else
      mem.base = Register{static_cast<std::uint8_t>(base | ((rex & 0x1) << 3)), 64};
  } else if (rm == 5 && out.mod == 0) {
    mem.rip_relative = true;
    disp32_only = true;
  } else {
    mem.base = Register{static_cast<std::uint8_t>(rm | ((rex & 0x1) << 3)), 64};
  }

  if (out.mod == 1) {
    if (!c.has(1))
      return std::nullopt;
    mem.displacement = c.take<std::int8_t>();
  } else if (out.mod == 2 || disp32_only) {
    if (!c.has(4))
      return std::nullopt;
    mem.displacement = c.take<std::int32_t>();
  }
  out.rm = mem;
  return out;
}

// Sign-extend to the operand width; 32-bit results are then zero-extended,
// matching how the value lands in the destination register.
std::int64_t immediate_for_width(std::int64_t signed_value, std::uint8_t width) {
  if (width == 32)
    return static_cast<std::int64_t>(static_cast<std::uint32_t>(signed_value));
  return signed_value;
}

std::string format_immediate(std::int64_t v) {
  if (v > -10 && v < 10)
    return std::to_string(v);
  if (v < 0)
    return fmt::format("-{:#x}", static_cast<std::uint64_t>(0) - static_cast<std::uint64_t>(v));
  return fmt::format("{:#x}", v);
}

std::string format_memory(const MemoryOperand& m, bool with_size) {
  std::string out;
  if (with_size) {
    if (m.width == 64) out = "qword ptr ";
    else if (m.width == 32) out = "dword ptr ";
  }
  out += '[';
  bool first = true;
  if (m.rip_relative) {
    out += "rip";
    first = false;
  }
  if (m.base) {
    out += m.base->name();
    first = false;
  }
  if (m.index) {
    if (!first)
      out += '+';
    out += fmt::format("{}*{}", m.index->name(), m.scale);
    first = false;
  }
  if (first) {
    out += fmt::format("{:#x}", static_cast<std::uint32_t>(m.displacement));
  } else if (m.displacement > 0) {
    out += fmt::format("+{:#x}", m.displacement);
  } else if (m.displacement < 0) {
    out += fmt::format("-{:#x}", -static_cast<std::int64_t>(m.displacement));
  }
  out += ']';
  return out;
}

}  // namespace

std::string Register::name() const {
  static constexpr std::array<std::string_view, 16> k64 = {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
                                                           "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};
  static constexpr std::array<std::string_view, 16> k32 = {"eax",  "ecx",  "edx",  "ebx",  "esp",  "ebp",
                                                           "esi",  "edi",  "r8d",  "r9d",  "r10d", "r11d",
                                                           "r12d", "r13d", "r14d", "r15d"};
  return std::string(width == 32 ? k32[number & 15] : k64[number & 15]);
}

const std::vector<SubsetRow>& subset_table() {
  static const std::vector<SubsetRow> rows = load_table();
  return rows;
}

std::string_view subset_table_json() { return detail::kSubsetTableJson; }

std::optional<Address> rip_target(const Instruction& insn) {
  for (const auto& op : insn.operands)
    if (const auto* m = std::get_if<MemoryOperand>(&op); m && m->rip_relative)
      return insn.end() + static_cast<Address>(static_cast<std::int64_t>(m->displacement));
  return std::nullopt;
}

std::variant<Instruction, DecodeFailure> try_decode(ByteView window, Address address) {
  auto unknown = [&](std::string_view why) {
    return DecodeFailure{ErrorCode::UnknownOpcode, fmt::format("{} at {}", why, hex_address(address))};
  };
  if (window.empty())
    return truncated(address);

  Cursor c{window};
  std::uint8_t rex = 0;
  if ((window[0] & 0xF0) == 0x40) {
    rex = window[0];
    c.pos = 1;
  }
  if (!c.has(1))
    return truncated(address);

  const OpcodeIndex& index = opcode_index();
  const std::vector<const SubsetRow*>* candidates = nullptr;
  std::uint8_t opcode = c.take<std::uint8_t>();
  if (opcode == 0x0F) {
    if (!c.has(1))
      return truncated(address);
    opcode = c.take<std::uint8_t>();
    candidates = &index.two_byte[opcode];
  } else {
    candidates = &index.one_byte[opcode];
  }
  if (candidates->empty())
    return unknown("opcode outside the supported subset");

  const bool rex_w = (rex & 0x8) != 0;
  const bool needs_modrm_ext = (*candidates)[0]->extension.has_value();
  std::optional<std::uint8_t> ext;
  if (needs_modrm_ext) {
    if (!c.has(1))
      return truncated(address);
    ext = (window[c.pos] >> 3) & 7;
  }

  const SubsetRow* row = nullptr;
  for (const SubsetRow* r : *candidates) {
    if (r->extension && r->extension != ext)
      continue;
    if (r->rex_w && *r->rex_w != rex_w)
      continue;
    row = r;
    break;
  }
  if (!row)
    return unknown("opcode extension outside the supported subset");
  if (rex && !uses_rex(row->encoding))
    return unknown("REX prefix on an instruction that takes no register operand");

  Instruction insn;
  insn.address = address;
  insn.mnemonic = row->mnemonic;
  const std::uint8_t width = rex_w ? 64 : 32;
  std::optional<std::int64_t> relative;

  switch (row->encoding) {
    case Encoding::ZO:
      break;
    case Encoding::O:
      insn.operands.push_back(Register{static_cast<std::uint8_t>((opcode & 7) | ((rex & 0x1) << 3)), 64});
      break;
    case Encoding::OI: {
      insn.operands.push_back(Register{static_cast<std::uint8_t>((opcode & 7) | ((rex & 0x1) << 3)), width});
      if (rex_w) {
        if (!c.has(8))
          return truncated(address);
        insn.operands.push_back(Immediate{c.take<std::int64_t>()});
      } else {
        if (!c.has(4))
          return truncated(address);
        insn.operands.push_back(Immediate{immediate_for_width(c.take<std::int32_t>(), 32)});
      }
      break;
    }
    case Encoding::MR:
    case Encoding::RM:
    case Encoding::MI:
    case Encoding::MI8:
    case Encoding::M: {
      const std::uint8_t w = row->encoding == Encoding::M ? 64 : width;
      auto modrm = decode_modrm(c, rex, w);
      if (!modrm)
        return truncated(address);
      if (row->memory_only && modrm->mod == 3)
        return unknown("register form of a memory-only instruction");
      const Register reg{modrm->reg, w};
      if (row->encoding == Encoding::MR) {
        insn.operands = {modrm->rm, reg};
      } else if (row->encoding == Encoding::RM) {
        if (row->memory_only)
          std::get<MemoryOperand>(modrm->rm).width = 0;
        insn.operands = {reg, modrm->rm};
      } else if (row->encoding == Encoding::MI) {
        if (!c.has(4))
          return truncated(address);
        insn.operands = {modrm->rm, Immediate{immediate_for_width(c.take<std::int32_t>(), w)}};
      } else if (row->encoding == Encoding::MI8) {
        if (!c.has(1))
          return truncated(address);
        insn.operands = {modrm->rm, Immediate{immediate_for_width(c.take<std::int8_t>(), w)}};
      } else {
        insn.operands = {modrm->rm};
      }
      break;
    }
    case Encoding::D8:
      if (!c.has(1))
        return truncated(address);
      relative = c.take<std::int8_t>();
      break;
    case Encoding::D32:
      if (!c.has(4))
        return truncated(address);
      relative = c.take<std::int32_t>();
      break;
  }

  insn.length = static_cast<std::uint8_t>(c.pos);
  insn.raw_bytes.assign(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(c.pos));
  insn.flow.kind = row->flow;
  if (relative) {
    const Address target = insn.end() + static_cast<Address>(*relative);
    insn.flow.target = target;
    insn.operands.push_back(Immediate{static_cast<std::int64_t>(target)});
  }
  return insn;
}

Instruction decode_instruction(ByteView window, Address address) {
  auto result = try_decode(window, address);
  if (auto* failure = std::get_if<DecodeFailure>(&result))
    throw Error(failure->code, failure->message);
  return std::get<Instruction>(std::move(result));
}

std::string render_operand(const Operand& op) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Register>)
          return v.name();
        else if constexpr (std::is_same_v<T, Immediate>)
          return format_immediate(v.value);
        else
          return format_memory(v, true);
      },
      op);
}

std::string render_operands(const Instruction& insn) {
  std::string out;
  for (std::size_t i = 0; i < insn.operands.size(); ++i) {
    if (i)
      out += ", ";
    const Operand& op = insn.operands[i];
    if (insn.flow.target && std::holds_alternative<Immediate>(op))
      out += hex_address(*insn.flow.target);
    else if (const auto* m = std::get_if<MemoryOperand>(&op))
      out += format_memory(*m, m->width != 0);
    else
      out += render_operand(op);
  }
  return out;
}

std::string render(const Instruction& insn) {
  std::string ops = render_operands(insn);
  return ops.empty() ? insn.mnemonic : insn.mnemonic + " " + ops;
}

}  // namespace spire::x86
