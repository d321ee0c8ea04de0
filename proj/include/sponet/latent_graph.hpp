// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sponet/fespace.hpp"

namespace sponet
{

// DoF adjacency from the structural pattern of the mass matrix, without
// self-loops. Edges are stored grouped by receiver: for receiver i the
// senders are neighbors[offsets[i] .. offsets[i+1]), ascending.
struct LatentGraph
{
  std::size_t num_nodes = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> neighbors;
  // Flat edge lists (receiver, sender) in the same order as `neighbors`.
  std::vector<std::size_t> receivers;
  std::vector<std::size_t> senders;

  std::size_t num_edges() const { return neighbors.size(); }
  std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

LatentGraph build_graph(const FeSpace &space);
LatentGraph graph_from_pattern(const CsrMatrix &pattern);

}  // namespace sponet
