// Independent reference computations the tests compare against.
#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "spire/layout.hpp"
#include "spire/x86.hpp"

namespace spire::test {

/// Block leaders recomputed from a flat instruction list: the entry, every
/// in-list jump target, every in-list address right after a jmp/jcc/ret/halt,
/// and every instruction not contiguous with the one before it.
std::set<Address> brute_force_leaders(std::vector<x86::Instruction> flat, Address entry);

/// O(E^2) pairwise crossing count over a layered order.
std::size_t brute_force_crossings(const std::vector<std::vector<std::size_t>>& order,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Smallest crossing count over all permutations of every layer. Only for
/// tiny graphs: a two-layer graph with given edges and layer sizes.
std::size_t minimum_two_layer_crossings(std::size_t upper, std::size_t lower,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Random DAG with 1..max_nodes nodes (ids shuffled, edges low -> high rank).
layout::AbstractGraph random_dag(std::mt19937_64& rng, std::size_t max_nodes);
/// Random directed graph, cycles and self-loops allowed.
layout::AbstractGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes);

struct ForcePosition {
  double x = 0;
  double y = 0;
};
/// Straight transcription of the force-directed formulas, with nodes in
/// graph order: returns final centres.
std::vector<ForcePosition> force_oracle(const layout::AbstractGraph& g, double area, int iterations,
                                        std::uint64_t seed);

}  // namespace spire::test
