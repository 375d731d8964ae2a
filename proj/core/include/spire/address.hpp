//===- spire/address.hpp - Virtual addresses and hex text ------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spire {

using Address = std::uint64_t;
using ByteView = std::span<const std::uint8_t>;
using Bytes = std::vector<std::uint8_t>;

/// "0x401000". Every address that leaves the process is written this way.
std::string hex_address(Address addr);

/// Accepts "0x"-prefixed or bare hex; nullopt on anything else.
std::optional<Address> parse_address(std::string_view text);

/// Lowercase hex without separators ("c3e8..."), and the inverse. The parser
/// tolerates whitespace between byte pairs.
std::string to_hex(ByteView bytes);
std::optional<Bytes> from_hex(std::string_view text);

}  // namespace spire
