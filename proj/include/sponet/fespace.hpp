// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sponet/csr.hpp"
#include "sponet/mesh.hpp"

namespace sponet
{

using ScalarField = std::function<double(double, double)>;

// Continuous Lagrange space of degree 1 or 2 on a TriMesh.
//
// Vertex DoFs come first in mesh vertex order. For degree 2, edge-midpoint
// DoFs follow, ordered by the (min vertex, max vertex) key of their edge.
// Cell DoFs list the three vertices, then the midpoints of edges (v0,v1),
// (v1,v2), (v2,v0).
class FeSpace
{
public:
  FeSpace(std::shared_ptr<const TriMesh> mesh, int degree);

  const TriMesh &mesh() const { return *mesh_; }
  const std::shared_ptr<const TriMesh> &mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  std::size_t dim() const { return coords_.size(); }
  std::size_t dofs_per_cell() const { return degree_ == 1 ? 3 : 6; }

  const std::vector<Point> &dof_coords() const { return coords_; }
  std::span<const std::size_t> cell_dofs(std::size_t t) const
  {
    return {cell_dofs_.data() + t * dofs_per_cell(), dofs_per_cell()};
  }
  const std::vector<std::size_t> &boundary_dofs(BoundaryTag tag) const
  {
    return boundary_dofs_[static_cast<std::size_t>(tag)];
  }
  // DoFs on each boundary facet: the two endpoints, then the midpoint for
  // degree 2. Same order as mesh().boundary_facets().
  std::span<const std::size_t> facet_dofs(std::size_t f) const
  {
    const std::size_t n = degree_ == 1 ? 2 : 3;
    return {facet_dofs_.data() + f * n, n};
  }

  // Cached result of assemble_mass.
  const CsrMatrix &mass() const { return mass_; }

  // Values of the cell basis functions at barycentric coordinates.
  std::array<double, 6> basis(const std::array<double, 3> &bary) const;

private:
  std::shared_ptr<const TriMesh> mesh_;
  int degree_;
  std::vector<Point> coords_;
  std::vector<std::size_t> cell_dofs_;
  std::vector<std::size_t> facet_dofs_;
  std::array<std::vector<std::size_t>, 4> boundary_dofs_;
  CsrMatrix mass_;
};

std::shared_ptr<const FeSpace> build_space(std::shared_ptr<const TriMesh> mesh, int degree);

struct FeFunction
{
  std::shared_ptr<const FeSpace> space;
  std::vector<double> dofs;

  FeFunction() = default;
  explicit FeFunction(std::shared_ptr<const FeSpace> s);
  FeFunction(std::shared_ptr<const FeSpace> s, std::vector<double> values);
};

CsrMatrix assemble_mass(const FeSpace &space);
CsrMatrix assemble_stiffness(const FeSpace &space);

std::vector<double> assemble_load(const FeSpace &space, const ScalarField &f);
std::vector<double> assemble_load(const FeSpace &space, const FeFunction &f);

// Nodal interpolation: dofs[i] = field(dof_coords[i]).
FeFunction interpolate(const ScalarField &field, std::shared_ptr<const FeSpace> space);

std::vector<double> evaluate(const FeFunction &u, std::span<const Point> points);
double evaluate(const FeFunction &u, const Point &p);

double l2_norm(const FeFunction &u);
double l2_error(const FeFunction &u, const FeFunction &v);

// L2 norm over the tagged side of the trace of u - g, by Gauss quadrature
// on each boundary facet.
double boundary_l2_error(const FeFunction &u, const ScalarField &g, BoundaryTag tag);
// Same, with g given as a function of the same space; the trace of the DoF
// difference is integrated, so equal boundary DoFs give exactly 0.
double boundary_l2_error(const FeFunction &u, const FeFunction &g, BoundaryTag tag);
double boundary_l2_norm(const FeFunction &u, BoundaryTag tag);

}  // namespace sponet
