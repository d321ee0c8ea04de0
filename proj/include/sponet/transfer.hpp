// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "sponet/csr.hpp"
#include "sponet/fespace.hpp"

namespace sponet
{

// Coarse-to-fine nodal interpolation: row j holds the coarse basis values at
// fine DoF j. Requires nested meshes (fine resolution a multiple of the
// coarse one) and equal degrees.
CsrMatrix build_prolongation(const FeSpace &coarse, const FeSpace &fine);

// Fine-to-coarse nodal injection: coarse DoF i takes the fine value at the
// same coordinate, so R P = I on the coarse space.
CsrMatrix build_restriction(const FeSpace &fine, const FeSpace &coarse);

// Nodal interpolation between two spaces on the same mesh (identity when the
// spaces coincide).
CsrMatrix build_interpolation(const FeSpace &u_space, const FeSpace &v_space);

// Maps DoFs of `from` onto `to` for nested spaces of equal degree:
// prolongation when `to` is finer, restriction when coarser, identity when
// equal.
CsrMatrix build_nested_transfer(const FeSpace &from, const FeSpace &to);

// Transfer matrices for a hierarchy, level 0 finest.
// restrictions[i]: U[i] -> U[i+1]; prolongations[i]: V[i+1] -> V[i];
// interpolations[i]: U[i] -> V[i].
struct TransferSet
{
  std::vector<CsrMatrix> restrictions;
  std::vector<CsrMatrix> prolongations;
  std::vector<CsrMatrix> interpolations;
};

TransferSet build_transfer_set(const std::vector<std::shared_ptr<const FeSpace>> &u_spaces,
                               const std::vector<std::shared_ptr<const FeSpace>> &v_spaces);

}  // namespace sponet
