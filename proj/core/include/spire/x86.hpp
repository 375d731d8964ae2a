//===- spire/x86.hpp - Table-driven x86-64 subset decoder ------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// The decoder understands the instruction forms listed in
// core/data/x86_subset.json and nothing else. Anything outside that table is
// reported as UnknownOpcode; the sweep drivers turn those into 1-byte gaps.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spire/address.hpp"
#include "spire/error.hpp"

namespace spire::x86 {

/// General-purpose register: number 0..15 (rax..r15) at 32 or 64 bits.
struct Register {
  std::uint8_t number = 0;
  std::uint8_t width = 64;

  std::string name() const;
  bool operator==(const Register&) const = default;
};

struct MemoryOperand {
  std::optional<Register> base;
  std::optional<Register> index;
  std::uint8_t scale = 1;
  std::int32_t displacement = 0;
  bool rip_relative = false;
  std::uint8_t width = 64;  // access size in bits, for "dword ptr" rendering

  bool operator==(const MemoryOperand&) const = default;
};

struct Immediate {
  std::int64_t value = 0;
  bool operator==(const Immediate&) const = default;
};

using Operand = std::variant<Register, Immediate, MemoryOperand>;

enum class FlowKind { Sequential, Call, JumpUncond, JumpCond, Return, Halt };

struct Flow {
  FlowKind kind = FlowKind::Sequential;
  std::optional<Address> target;  // absolute; absent for indirect transfers

  bool operator==(const Flow&) const = default;
};

struct Instruction {
  Address address = 0;
  std::uint8_t length = 0;
  std::string mnemonic;
  std::vector<Operand> operands;
  Flow flow;
  Bytes raw_bytes;

  Address end() const noexcept { return address + length; }
  bool operator==(const Instruction&) const = default;
};

/// Effective address of a RIP-relative memory operand of `insn`.
std::optional<Address> rip_target(const Instruction& insn);

/// Encoding classes used by the subset table.
enum class Encoding { ZO, O, OI, MR, RM, MI, MI8, M, D8, D32 };

struct SubsetRow {
  std::vector<std::uint8_t> opcode;  // 1 or 2 bytes; for +r forms the base byte
  bool plus_register = false;        // "50+r"
  std::optional<std::uint8_t> extension;  // ModRM.reg for group opcodes
  std::optional<bool> rex_w;         // row applies only when REX.W matches
  bool memory_only = false;
  Encoding encoding = Encoding::ZO;
  std::string mnemonic;
  FlowKind flow = FlowKind::Sequential;
  std::string opcode_text;  // as written in the data file
};

/// Rows parsed from the embedded data file, in file order.
const std::vector<SubsetRow>& subset_table();

/// The raw data file contents.
std::string_view subset_table_json();

struct DecodeFailure {
  ErrorCode code;  // UnknownOpcode or Truncated
  std::string message;
};

/// Non-throwing form used by the sweep drivers.
std::variant<Instruction, DecodeFailure> try_decode(ByteView window, Address address);

/// Throws Error(UnknownOpcode | Truncated).
Instruction decode_instruction(ByteView window, Address address);

/// Canonical Intel-style text: "mov rax, 0x10", "call 0x401020".
std::string render(const Instruction& insn);
std::string render_operands(const Instruction& insn);
std::string render_operand(const Operand& op);

}  // namespace spire::x86
