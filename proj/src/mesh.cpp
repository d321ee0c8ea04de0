// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sponet
{

std::string_view to_string(BoundaryTag tag)
{
  switch (tag)
  {
    case BoundaryTag::Bottom:
      return "bottom";
    case BoundaryTag::Right:
      return "right";
    case BoundaryTag::Top:
      return "top";
    case BoundaryTag::Left:
      return "left";
  }
  return "unknown";
}

BoundaryTag parse_boundary_tag(std::string_view name)
{
  for (auto tag : kAllBoundaryTags)
  {
    if (to_string(tag) == name)
    {
      return tag;
    }
  }
  throw std::invalid_argument("unknown boundary tag '" + std::string(name) + "'");
}

TriMesh::TriMesh(std::size_t nx) : nx_(nx)
{
  if (nx == 0)
  {
    throw std::invalid_argument("mesh resolution must be positive");
  }
  const double n = static_cast<double>(nx);
  vertices_.reserve((nx + 1) * (nx + 1));
  for (std::size_t j = 0; j <= nx; j++)
  {
    for (std::size_t i = 0; i <= nx; i++)
    {
      // i / n is correctly rounded, so nested meshes share coordinates bitwise.
      vertices_.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  triangles_.reserve(2 * nx * nx);
  for (std::size_t j = 0; j < nx; j++)
  {
    for (std::size_t i = 0; i < nx; i++)
    {
      const auto v00 = vertex_index(i, j), v10 = vertex_index(i + 1, j);
      const auto v01 = vertex_index(i, j + 1), v11 = vertex_index(i + 1, j + 1);
      triangles_.push_back({v00, v10, v11});
      triangles_.push_back({v00, v11, v01});
    }
  }
  facets_.reserve(4 * nx);
  for (std::size_t i = 0; i < nx; i++)
  {
    facets_.push_back({{vertex_index(i, 0), vertex_index(i + 1, 0)}, BoundaryTag::Bottom});
  }
  for (std::size_t j = 0; j < nx; j++)
  {
    facets_.push_back({{vertex_index(nx, j), vertex_index(nx, j + 1)}, BoundaryTag::Right});
  }
  for (std::size_t i = nx; i > 0; i--)
  {
    facets_.push_back({{vertex_index(i, nx), vertex_index(i - 1, nx)}, BoundaryTag::Top});
  }
  for (std::size_t j = nx; j > 0; j--)
  {
    facets_.push_back({{vertex_index(0, j), vertex_index(0, j - 1)}, BoundaryTag::Left});
  }
}

double TriMesh::signed_area(std::size_t t) const
{
  const auto &tri = triangles_[t];
  const auto &a = vertices_[tri[0]], &b = vertices_[tri[1]], &c = vertices_[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

std::array<double, 3> TriMesh::barycentric(std::size_t t, const Point &p) const
{
  const auto &tri = triangles_[t];
  const auto &a = vertices_[tri[0]], &b = vertices_[tri[1]], &c = vertices_[tri[2]];
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
  const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
  return {1.0 - l1 - l2, l1, l2};
}

std::size_t TriMesh::locate(const Point &p, std::array<double, 3> &bary, double tol) const
{
  if (!(p.x >= -tol && p.x <= 1.0 + tol && p.y >= -tol && p.y <= 1.0 + tol))
  {
    throw std::out_of_range("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") lies outside the unit square");
  }
  const double n = static_cast<double>(nx_);
  const auto cell_of = [&](double s)
  {
    const double c = std::floor(std::clamp(s, 0.0, 1.0) * n);
    return std::min(static_cast<std::size_t>(std::max(c, 0.0)), nx_ - 1);
  };
  const std::size_t i = cell_of(p.x), j = cell_of(p.y);
  const std::size_t cell = j * nx_ + i;
  // Below the cell diagonal (local y <= local x) is the lower triangle.
  const double lx = p.x * n - static_cast<double>(i), ly = p.y * n - static_cast<double>(j);
  const std::size_t t = 2 * cell + (ly > lx ? 1 : 0);
  bary = barycentric(t, p);
  return t;
}

std::shared_ptr<const TriMesh> unit_square_mesh(std::size_t nx)
{
  return std::make_shared<const TriMesh>(nx);
}

MeshHierarchy mesh_hierarchy(std::size_t coarse_nx, std::size_t refinements)
{
  if (coarse_nx == 0)
  {
    throw std::invalid_argument("coarse mesh resolution must be positive");
  }
  MeshHierarchy h;
  for (std::size_t r = refinements + 1; r-- > 0;)
  {
    h.levels.push_back(unit_square_mesh(coarse_nx << r));
  }
  for (std::size_t l = 0; l + 1 < h.levels.size(); l++)
  {
    const auto &fine = *h.levels[l];
    const auto &coarse = *h.levels[l + 1];
    std::vector<std::size_t> parents(fine.triangles().size());
    for (std::size_t t = 0; t < parents.size(); t++)
    {
      const auto &tri = fine.triangles()[t];
      Point c{0.0, 0.0};
      for (auto v : tri)
      {
        c.x += fine.vertices()[v].x / 3.0;
        c.y += fine.vertices()[v].y / 3.0;
      }
      std::array<double, 3> bary;
      parents[t] = coarse.locate(c, bary);
    }
    h.parent_triangle.push_back(std::move(parents));
  }
  return h;
}

}  // namespace sponet
