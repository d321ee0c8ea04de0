// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/latent_graph.hpp"

#include <stdexcept>

namespace sponet
{

LatentGraph graph_from_pattern(const CsrMatrix &pattern)
{
  if (pattern.rows() != pattern.cols())
  {
    throw std::invalid_argument("latent graph pattern must be square");
  }
  LatentGraph g;
  g.num_nodes = pattern.rows();
  g.offsets.assign(g.num_nodes + 1, 0);
  for (std::size_t i = 0; i < g.num_nodes; i++)
  {
    for (auto k = pattern.row_offsets()[i]; k < pattern.row_offsets()[i + 1]; k++)
    {
      const auto j = pattern.col_indices()[k];
      if (j != i)
      {
        g.neighbors.push_back(j);
        g.receivers.push_back(i);
        g.senders.push_back(j);
      }
    }
    g.offsets[i + 1] = g.neighbors.size();
  }
  return g;
}

LatentGraph build_graph(const FeSpace &space) { return graph_from_pattern(space.mass()); }

}  // namespace sponet
