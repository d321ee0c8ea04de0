// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/fespace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace sponet
{

namespace
{

struct QuadPoint
{
  std::array<double, 3> bary;
  double weight;  // fraction of the triangle area
};

// Degree 2: edge midpoints.
const std::vector<QuadPoint> &quadrature_degree2()
{
  static const std::vector<QuadPoint> rule = {
      {{0.5, 0.5, 0.0}, 1.0 / 3.0},
      {{0.0, 0.5, 0.5}, 1.0 / 3.0},
      {{0.5, 0.0, 0.5}, 1.0 / 3.0},
  };
  return rule;
}

// Degree 4: six-point symmetric Dunavant rule.
const std::vector<QuadPoint> &quadrature_degree4()
{
  constexpr double a = 0.44594849091596488632, b = 1.0 - 2.0 * a;
  constexpr double c = 0.09157621350977074346, d = 1.0 - 2.0 * c;
  constexpr double wa = 0.22338158967801146570, wc = 0.10995174365532186764;
  static const std::vector<QuadPoint> rule = {
      {{b, a, a}, wa}, {{a, b, a}, wa}, {{a, a, b}, wa},
      {{d, c, c}, wc}, {{c, d, c}, wc}, {{c, c, d}, wc},
  };
  return rule;
}

const std::vector<QuadPoint> &quadrature_for(const FeSpace &space)
{
  return space.degree() == 1 ? quadrature_degree2() : quadrature_degree4();
}

// Three-point Gauss-Legendre on [0, 1], exact to degree 5.
constexpr std::array<std::pair<double, double>, 3> kLineRule = {{
    {0.5 - 0.38729833462074168852, 5.0 / 18.0},
    {0.5, 8.0 / 18.0},
    {0.5 + 0.38729833462074168852, 5.0 / 18.0},
}};

Point physical_point(const TriMesh &mesh, std::size_t t, const std::array<double, 3> &bary)
{
  const auto &tri = mesh.triangles()[t];
  Point p{0.0, 0.0};
  for (int k = 0; k < 3; k++)
  {
    p.x += bary[k] * mesh.vertices()[tri[k]].x;
    p.y += bary[k] * mesh.vertices()[tri[k]].y;
  }
  return p;
}

// Gradients of the barycentric coordinates, constant on the triangle.
std::array<Point, 3> barycentric_gradients(const TriMesh &mesh, std::size_t t)
{
  const auto &tri = mesh.triangles()[t];
  const auto &a = mesh.vertices()[tri[0]], &b = mesh.vertices()[tri[1]],
             &c = mesh.vertices()[tri[2]];
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const Point g1{(c.y - a.y) / det, -(c.x - a.x) / det};
  const Point g2{-(b.y - a.y) / det, (b.x - a.x) / det};
  return {Point{-g1.x - g2.x, -g1.y - g2.y}, g1, g2};
}

constexpr std::array<std::array<int, 2>, 3> kCellEdges = {{{0, 1}, {1, 2}, {2, 0}}};

std::array<Point, 6> basis_gradients(int degree, const std::array<double, 3> &l,
                                     const std::array<Point, 3> &gl)
{
  std::array<Point, 6> g{};
  if (degree == 1)
  {
    return {gl[0], gl[1], gl[2], Point{}, Point{}, Point{}};
  }
  for (int k = 0; k < 3; k++)
  {
    const double s = 4.0 * l[k] - 1.0;
    g[k] = {s * gl[k].x, s * gl[k].y};
  }
  for (int e = 0; e < 3; e++)
  {
    const auto [i, j] = kCellEdges[e];
    g[3 + e] = {4.0 * (l[i] * gl[j].x + l[j] * gl[i].x), 4.0 * (l[i] * gl[j].y + l[j] * gl[i].y)};
  }
  return g;
}

void require_same_space(const FeFunction &u, const FeFunction &v)
{
  if (u.space != v.space &&
      (u.space->dim() != v.space->dim() || u.space->degree() != v.space->degree() ||
       u.space->mesh().resolution() != v.space->mesh().resolution()))
  {
    throw std::invalid_argument("functions live in different spaces");
  }
}

}  // namespace

FeSpace::FeSpace(std::shared_ptr<const TriMesh> mesh, int degree)
  : mesh_(std::move(mesh)), degree_(degree)
{
  if (degree != 1 && degree != 2)
  {
    throw std::invalid_argument("unsupported Lagrange degree " + std::to_string(degree));
  }
  const auto &verts = mesh_->vertices();
  const auto &tris = mesh_->triangles();
  coords_ = verts;

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (degree_ == 2)
  {
    edges.reserve(3 * tris.size());
    for (const auto &tri : tris)
    {
      for (const auto &[i, j] : kCellEdges)
      {
        edges.emplace_back(std::min(tri[i], tri[j]), std::max(tri[i], tri[j]));
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto &[a, b] : edges)
    {
      coords_.push_back({0.5 * (verts[a].x + verts[b].x), 0.5 * (verts[a].y + verts[b].y)});
    }
  }
  const auto edge_dof = [&](std::size_t a, std::size_t b)
  {
    const std::pair<std::size_t, std::size_t> key{std::min(a, b), std::max(a, b)};
    const auto it = std::lower_bound(edges.begin(), edges.end(), key);
    return verts.size() + static_cast<std::size_t>(it - edges.begin());
  };

  cell_dofs_.reserve(tris.size() * dofs_per_cell());
  for (const auto &tri : tris)
  {
    cell_dofs_.insert(cell_dofs_.end(), tri.begin(), tri.end());
    if (degree_ == 2)
    {
      for (const auto &[i, j] : kCellEdges)
      {
        cell_dofs_.push_back(edge_dof(tri[i], tri[j]));
      }
    }
  }

  for (const auto &facet : mesh_->boundary_facets())
  {
    const auto [a, b] = facet.vertices;
    auto &side = boundary_dofs_[static_cast<std::size_t>(facet.tag)];
    facet_dofs_.push_back(a);
    facet_dofs_.push_back(b);
    side.push_back(a);
    side.push_back(b);
    if (degree_ == 2)
    {
      facet_dofs_.push_back(edge_dof(a, b));
      side.push_back(edge_dof(a, b));
    }
  }
  for (auto &side : boundary_dofs_)
  {
    std::sort(side.begin(), side.end());
    side.erase(std::unique(side.begin(), side.end()), side.end());
  }
  mass_ = assemble_mass(*this);
}

std::array<double, 6> FeSpace::basis(const std::array<double, 3> &l) const
{
  if (degree_ == 1)
  {
    return {l[0], l[1], l[2], 0.0, 0.0, 0.0};
  }
  std::array<double, 6> phi{};
  for (int k = 0; k < 3; k++)
  {
    phi[k] = l[k] * (2.0 * l[k] - 1.0);
  }
  for (int e = 0; e < 3; e++)
  {
    phi[3 + e] = 4.0 * l[kCellEdges[e][0]] * l[kCellEdges[e][1]];
  }
  return phi;
}

std::shared_ptr<const FeSpace> build_space(std::shared_ptr<const TriMesh> mesh, int degree)
{
  return std::make_shared<const FeSpace>(std::move(mesh), degree);
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> s) : space(std::move(s))
{
  dofs.assign(space->dim(), 0.0);
}

FeFunction::FeFunction(std::shared_ptr<const FeSpace> s, std::vector<double> values)
  : space(std::move(s)), dofs(std::move(values))
{
  if (dofs.size() != space->dim())
  {
    throw std::invalid_argument("DoF vector length " + std::to_string(dofs.size()) +
                                " does not match space dimension " +
                                std::to_string(space->dim()));
  }
}

CsrMatrix assemble_mass(const FeSpace &space)
{
  const auto &mesh = space.mesh();
  const auto &rule = quadrature_for(space);
  const std::size_t nd = space.dofs_per_cell();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.triangles().size() * nd * nd);
  for (std::size_t t = 0; t < mesh.triangles().size(); t++)
  {
    const double area = mesh.signed_area(t);
    const auto dofs = space.cell_dofs(t);
    std::array<double, 36> local{};
    for (const auto &q : rule)
    {
      const auto phi = space.basis(q.bary);
      for (std::size_t i = 0; i < nd; i++)
      {
        for (std::size_t j = 0; j < nd; j++)
        {
          local[i * nd + j] += q.weight * area * phi[i] * phi[j];
        }
      }
    }
    for (std::size_t i = 0; i < nd; i++)
    {
      for (std::size_t j = 0; j < nd; j++)
      {
        // Read the upper triangle only so the assembled matrix is exactly symmetric.
        triplets.push_back({dofs[i], dofs[j], local[std::min(i, j) * nd + std::max(i, j)]});
      }
    }
  }
  return CsrMatrix::from_triplets(space.dim(), space.dim(), std::move(triplets));
}

CsrMatrix assemble_stiffness(const FeSpace &space)
{
  const auto &mesh = space.mesh();
  const auto &rule = quadrature_for(space);
  const std::size_t nd = space.dofs_per_cell();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.triangles().size() * nd * nd);
  for (std::size_t t = 0; t < mesh.triangles().size(); t++)
  {
    const double area = mesh.signed_area(t);
    const auto gl = barycentric_gradients(mesh, t);
    const auto dofs = space.cell_dofs(t);
    std::array<double, 36> local{};
    for (const auto &q : rule)
    {
      const auto g = basis_gradients(space.degree(), q.bary, gl);
      for (std::size_t i = 0; i < nd; i++)
      {
        for (std::size_t j = 0; j < nd; j++)
        {
          local[i * nd + j] += q.weight * area * (g[i].x * g[j].x + g[i].y * g[j].y);
        }
      }
    }
    for (std::size_t i = 0; i < nd; i++)
    {
      for (std::size_t j = 0; j < nd; j++)
      {
        triplets.push_back({dofs[i], dofs[j], local[std::min(i, j) * nd + std::max(i, j)]});
      }
    }
  }
  return CsrMatrix::from_triplets(space.dim(), space.dim(), std::move(triplets));
}

namespace
{

template <typename Integrand>
std::vector<double> assemble_load_impl(const FeSpace &space, Integrand &&value_at)
{
  const auto &mesh = space.mesh();
  const auto &rule = quadrature_for(space);
  std::vector<double> b(space.dim(), 0.0);
  for (std::size_t t = 0; t < mesh.triangles().size(); t++)
  {
    const double area = mesh.signed_area(t);
    const auto dofs = space.cell_dofs(t);
    for (const auto &q : rule)
    {
      const auto phi = space.basis(q.bary);
      const double fq = value_at(t, q.bary, phi);
      for (std::size_t i = 0; i < dofs.size(); i++)
      {
        b[dofs[i]] += q.weight * area * fq * phi[i];
      }
    }
  }
  return b;
}

}  // namespace

std::vector<double> assemble_load(const FeSpace &space, const ScalarField &f)
{
  return assemble_load_impl(space,
                            [&](std::size_t t, const std::array<double, 3> &bary, const auto &)
                            {
                              const auto p = physical_point(space.mesh(), t, bary);
                              return f(p.x, p.y);
                            });
}

std::vector<double> assemble_load(const FeSpace &space, const FeFunction &f)
{
  if (f.space->dim() != space.dim() || f.space->degree() != space.degree())
  {
    throw std::invalid_argument("load function lives in a different space");
  }
  return assemble_load_impl(space,
                            [&](std::size_t t, const auto &, const std::array<double, 6> &phi)
                            {
                              const auto dofs = space.cell_dofs(t);
                              double s = 0.0;
                              for (std::size_t i = 0; i < dofs.size(); i++)
                              {
                                s += f.dofs[dofs[i]] * phi[i];
                              }
                              return s;
                            });
}

FeFunction interpolate(const ScalarField &field, std::shared_ptr<const FeSpace> space)
{
  FeFunction u(space);
  const auto &coords = space->dof_coords();
  for (std::size_t i = 0; i < coords.size(); i++)
  {
    const double v = field(coords[i].x, coords[i].y);
    if (!std::isfinite(v))
    {
      throw std::domain_error("field is not finite at DoF " + std::to_string(i));
    }
    u.dofs[i] = v;
  }
  return u;
}

double evaluate(const FeFunction &u, const Point &p)
{
  const auto &space = *u.space;
  std::array<double, 3> bary;
  const auto t = space.mesh().locate(p, bary);
  const auto phi = space.basis(bary);
  const auto dofs = space.cell_dofs(t);
  double s = 0.0;
  for (std::size_t i = 0; i < dofs.size(); i++)
  {
    s += u.dofs[dofs[i]] * phi[i];
  }
  return s;
}

std::vector<double> evaluate(const FeFunction &u, std::span<const Point> points)
{
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto &p : points)
  {
    out.push_back(evaluate(u, p));
  }
  return out;
}

double l2_norm(const FeFunction &u)
{
  const auto mu = u.space->mass().multiply(u.dofs);
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); i++)
  {
    s += u.dofs[i] * mu[i];
  }
  return std::sqrt(std::max(s, 0.0));
}

double l2_error(const FeFunction &u, const FeFunction &v)
{
  require_same_space(u, v);
  FeFunction d(u.space);
  for (std::size_t i = 0; i < d.dofs.size(); i++)
  {
    d.dofs[i] = u.dofs[i] - v.dofs[i];
  }
  return l2_norm(d);
}

namespace
{

// Integrates value^2 over the facets carrying `tag`; value(f, xi, p) is
// sampled at parameter xi in [0, 1] along facet f.
template <typename Value>
double facet_integral(const FeSpace &space, BoundaryTag tag, Value &&value)
{
  const auto &mesh = space.mesh();
  double s = 0.0;
  for (std::size_t f = 0; f < mesh.boundary_facets().size(); f++)
  {
    const auto &facet = mesh.boundary_facets()[f];
    if (facet.tag != tag)
    {
      continue;
    }
    const auto &a = mesh.vertices()[facet.vertices[0]];
    const auto &b = mesh.vertices()[facet.vertices[1]];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    for (const auto &[xi, w] : kLineRule)
    {
      const Point p{a.x + xi * (b.x - a.x), a.y + xi * (b.y - a.y)};
      const double v = value(f, xi, p);
      s += w * len * v * v;
    }
  }
  return s;
}

// 1D trace basis on a facet: endpoints then midpoint.
std::array<double, 3> trace_basis(int degree, double xi)
{
  if (degree == 1)
  {
    return {1.0 - xi, xi, 0.0};
  }
  return {(1.0 - xi) * (1.0 - 2.0 * xi), xi * (2.0 * xi - 1.0), 4.0 * xi * (1.0 - xi)};
}

template <typename Dofs>
double trace_value(const FeSpace &space, std::size_t f, double xi, const Dofs &dofs)
{
  const auto phi = trace_basis(space.degree(), xi);
  const auto fd = space.facet_dofs(f);
  double v = 0.0;
  for (std::size_t k = 0; k < fd.size(); k++)
  {
    v += dofs[fd[k]] * phi[k];
  }
  return v;
}

}  // namespace

double boundary_l2_error(const FeFunction &u, const ScalarField &g, BoundaryTag tag)
{
  const auto &space = *u.space;
  return std::sqrt(facet_integral(space, tag,
                                  [&](std::size_t f, double xi, const Point &p)
                                  { return trace_value(space, f, xi, u.dofs) - g(p.x, p.y); }));
}

double boundary_l2_error(const FeFunction &u, const FeFunction &g, BoundaryTag tag)
{
  require_same_space(u, g);
  std::vector<double> d(u.dofs.size());
  for (std::size_t i = 0; i < d.size(); i++)
  {
    d[i] = u.dofs[i] - g.dofs[i];
  }
  const auto &space = *u.space;
  return std::sqrt(facet_integral(space, tag, [&](std::size_t f, double xi, const Point &)
                                  { return trace_value(space, f, xi, d); }));
}

double boundary_l2_norm(const FeFunction &u, BoundaryTag tag)
{
  return boundary_l2_error(u, [](double, double) { return 0.0; }, tag);
}

}  // namespace sponet
