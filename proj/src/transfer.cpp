// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/transfer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sponet
{

namespace
{

// Basis values below this are dropped from the sparse pattern; nodal
// evaluation at nested points gives exact zeros up to rounding.
constexpr double kDropTolerance = 1e-14;

CsrMatrix nodal_evaluation_matrix(const FeSpace &source, const FeSpace &target)
{
  std::vector<Triplet> triplets;
  const auto &coords = target.dof_coords();
  for (std::size_t j = 0; j < coords.size(); j++)
  {
    std::array<double, 3> bary;
    const auto t = source.mesh().locate(coords[j], bary);
    const auto phi = source.basis(bary);
    const auto dofs = source.cell_dofs(t);
    for (std::size_t k = 0; k < dofs.size(); k++)
    {
      if (std::abs(phi[k]) > kDropTolerance)
      {
        triplets.push_back({j, dofs[k], phi[k]});
      }
    }
  }
  return CsrMatrix::from_triplets(target.dim(), source.dim(), std::move(triplets));
}

void require_nested(const FeSpace &coarse, const FeSpace &fine)
{
  const auto nc = coarse.mesh().resolution(), nf = fine.mesh().resolution();
  if (nf < nc || nf % nc != 0)
  {
    throw std::invalid_argument("meshes are not nested: resolutions " + std::to_string(nc) +
                                " and " + std::to_string(nf));
  }
  if (coarse.degree() != fine.degree())
  {
    throw std::invalid_argument("transfer between spaces of different degree");
  }
}

}  // namespace

CsrMatrix build_prolongation(const FeSpace &coarse, const FeSpace &fine)
{
  require_nested(coarse, fine);
  return nodal_evaluation_matrix(coarse, fine);
}

CsrMatrix build_restriction(const FeSpace &fine, const FeSpace &coarse)
{
  require_nested(coarse, fine);
  // Every coarse DoF coordinate is a fine DoF coordinate; locate it through
  // the fine basis, which has a single unit entry there.
  std::vector<Triplet> triplets;
  const auto &coords = coarse.dof_coords();
  for (std::size_t i = 0; i < coords.size(); i++)
  {
    std::array<double, 3> bary;
    const auto t = fine.mesh().locate(coords[i], bary);
    const auto phi = fine.basis(bary);
    const auto dofs = fine.cell_dofs(t);
    std::size_t hit = dofs.size();
    for (std::size_t k = 0; k < dofs.size(); k++)
    {
      if (std::abs(phi[k] - 1.0) < 1e-12)
      {
        hit = k;
      }
    }
    if (hit == dofs.size())
    {
      throw std::invalid_argument("coarse DoF " + std::to_string(i) +
                                  " does not coincide with a fine DoF");
    }
    triplets.push_back({i, dofs[hit], 1.0});
  }
  return CsrMatrix::from_triplets(coarse.dim(), fine.dim(), std::move(triplets));
}

CsrMatrix build_interpolation(const FeSpace &u_space, const FeSpace &v_space)
{
  if (u_space.mesh_ptr() != v_space.mesh_ptr() &&
      u_space.mesh().resolution() != v_space.mesh().resolution())
  {
    throw std::invalid_argument("interpolation requires spaces on the same mesh");
  }
  if (u_space.degree() == v_space.degree())
  {
    return CsrMatrix::identity(u_space.dim());
  }
  return nodal_evaluation_matrix(u_space, v_space);
}

CsrMatrix build_nested_transfer(const FeSpace &from, const FeSpace &to)
{
  const auto nf = from.mesh().resolution(), nt = to.mesh().resolution();
  if (nf == nt)
  {
    return build_interpolation(from, to);
  }
  return nt > nf ? build_prolongation(from, to) : build_restriction(from, to);
}

TransferSet build_transfer_set(const std::vector<std::shared_ptr<const FeSpace>> &u_spaces,
                               const std::vector<std::shared_ptr<const FeSpace>> &v_spaces)
{
  if (u_spaces.size() != v_spaces.size() || u_spaces.empty())
  {
    throw std::invalid_argument("hierarchy input/output space lists must match and be non-empty");
  }
  TransferSet set;
  for (std::size_t i = 0; i < u_spaces.size(); i++)
  {
    set.interpolations.push_back(build_interpolation(*u_spaces[i], *v_spaces[i]));
    if (i + 1 < u_spaces.size())
    {
      set.restrictions.push_back(build_restriction(*u_spaces[i], *u_spaces[i + 1]));
      set.prolongations.push_back(build_prolongation(*v_spaces[i + 1], *v_spaces[i]));
    }
  }
  return set;
}

}  // namespace sponet
