// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sponet/fespace.hpp"

namespace sponet
{

// Strong Dirichlet condition u = g on one side, stored as the constrained
// DoFs of that side and the nodal values g(x_dof).
struct DirichletBc
{
  std::shared_ptr<const FeSpace> space;
  BoundaryTag tag;
  ScalarField g;
  std::vector<std::size_t> dofs;
  std::vector<double> values;

  DirichletBc(std::shared_ptr<const FeSpace> space, BoundaryTag tag, ScalarField g);
};

// Flattens a list of conditions into (dof, value) pairs. When sides share a
// DoF it appears once and the later condition in the list wins.
struct Constraints
{
  std::vector<std::size_t> dofs;
  std::vector<double> values;
};
Constraints collect_constraints(const std::vector<DirichletBc> &bcs);

// Overwrites constrained entries of a DoF vector in place.
void apply_constraints(const Constraints &c, std::vector<double> &dofs);

// Boundary data of the Poisson benchmark: u = 1e-2 sin(pi x) on the top side
// and u = 0 on the other three. The top condition is listed last so it owns
// the top corners.
double poisson_top_data(double x, double y);
std::vector<DirichletBc> poisson_bcs(std::shared_ptr<const FeSpace> space);

// Named boundary-condition sets: "poisson", "zero" (homogeneous on all sides)
// and "none".
std::vector<DirichletBc> make_bcs(const std::string &name, std::shared_ptr<const FeSpace> space);

}  // namespace sponet
