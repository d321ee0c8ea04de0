// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/boundary.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace sponet
{

DirichletBc::DirichletBc(std::shared_ptr<const FeSpace> s, BoundaryTag t, ScalarField field)
  : space(std::move(s)), tag(t), g(std::move(field)), dofs(space->boundary_dofs(tag))
{
  values.reserve(dofs.size());
  for (auto d : dofs)
  {
    const auto &p = space->dof_coords()[d];
    const double v = g(p.x, p.y);
    if (!std::isfinite(v))
    {
      throw std::domain_error("boundary data is not finite on side " + std::string(to_string(tag)));
    }
    values.push_back(v);
  }
}

Constraints collect_constraints(const std::vector<DirichletBc> &bcs)
{
  Constraints c;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (const auto &bc : bcs)
  {
    for (std::size_t k = 0; k < bc.dofs.size(); k++)
    {
      const auto [it, fresh] = slot.try_emplace(bc.dofs[k], c.dofs.size());
      if (fresh)
      {
        c.dofs.push_back(bc.dofs[k]);
        c.values.push_back(bc.values[k]);
      }
      else
      {
        c.values[it->second] = bc.values[k];
      }
    }
  }
  return c;
}

void apply_constraints(const Constraints &c, std::vector<double> &dofs)
{
  for (std::size_t k = 0; k < c.dofs.size(); k++)
  {
    dofs.at(c.dofs[k]) = c.values[k];
  }
}

double poisson_top_data(double x, double) { return 1e-2 * std::sin(std::numbers::pi * x); }

std::vector<DirichletBc> poisson_bcs(std::shared_ptr<const FeSpace> space)
{
  const auto zero = [](double, double) { return 0.0; };
  std::vector<DirichletBc> bcs;
  bcs.emplace_back(space, BoundaryTag::Bottom, zero);
  bcs.emplace_back(space, BoundaryTag::Right, zero);
  bcs.emplace_back(space, BoundaryTag::Left, zero);
  bcs.emplace_back(space, BoundaryTag::Top, poisson_top_data);
  return bcs;
}

std::vector<DirichletBc> make_bcs(const std::string &name, std::shared_ptr<const FeSpace> space)
{
  if (name == "poisson")
  {
    return poisson_bcs(std::move(space));
  }
  if (name == "zero")
  {
    std::vector<DirichletBc> bcs;
    for (auto tag : kAllBoundaryTags)
    {
      bcs.emplace_back(space, tag, [](double, double) { return 0.0; });
    }
    return bcs;
  }
  if (name == "none")
  {
    return {};
  }
  throw std::invalid_argument("unknown boundary condition set '" + name + "'");
}

}  // namespace sponet
