//===- spire/fixture.hpp - Build test ELF64 files from recipes -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// A recipe is a line-oriented list of byte runs with labels, so fixtures are
// built without a system toolchain:
//
//   # comment
//   entry main
//   section .text 0x401000 exec
//   label main func global
//     55 48 89 e5
//     e8 rel32:helper        # call helper
//     c3
//   label helper func
//     c3
//   section .rodata 0x402000
//     "usage: %s" 00
//   section .got 0x403000 write
//   label fopen_slot
//     abs64:fopen_stub
//   import fopen fopen_slot
//
// Directives: entry, strip, section <name> <vaddr> [exec] [write] [noalloc],
// label <name> [func|object] [global|local|weak], import <symbol> <slot-label>.
// Data tokens: hex byte pairs, "quoted text" (\n \t \0 \\ \" escapes),
// rel8:/rel32:<label> (displacement from the end of the field),
// abs32:/abs64:<label>, align:<n> (pads with cc in exec sections, 00 elsewhere).
//
//===----------------------------------------------------------------------===//
#pragma once

#include <map>
#include <string>
#include <string_view>

#include "spire/address.hpp"

namespace spire {

struct BuiltFixture {
  Bytes bytes;
  std::map<std::string, Address> labels;
};

/// Throws Error(BadRequest) naming the offending recipe line.
BuiltFixture build_fixture(std::string_view recipe);

}  // namespace spire
