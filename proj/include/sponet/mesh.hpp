// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

namespace sponet
{

struct Point
{
  double x = 0.0;
  double y = 0.0;
};

enum class BoundaryTag
{
  Bottom = 0,
  Right = 1,
  Top = 2,
  Left = 3
};

inline constexpr std::array<BoundaryTag, 4> kAllBoundaryTags = {
    BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Left};

std::string_view to_string(BoundaryTag tag);
BoundaryTag parse_boundary_tag(std::string_view name);

struct BoundaryFacet
{
  std::array<std::size_t, 2> vertices;
  BoundaryTag tag;
};

//
// Structured triangulation of the unit square. Cell (i, j) spans
// [i/n, (i+1)/n] x [j/n, (j+1)/n] and is split along its lower-left to
// upper-right diagonal into a lower triangle (index 2c) and an upper
// triangle (index 2c + 1), both counter-clockwise.
//
class TriMesh
{
public:
  explicit TriMesh(std::size_t nx);

  std::size_t resolution() const { return nx_; }
  const std::vector<Point> &vertices() const { return vertices_; }
  const std::vector<std::array<std::size_t, 3>> &triangles() const { return triangles_; }
  const std::vector<BoundaryFacet> &boundary_facets() const { return facets_; }

  std::size_t vertex_index(std::size_t i, std::size_t j) const { return j * (nx_ + 1) + i; }
  double signed_area(std::size_t t) const;

  // Locates the triangle containing p and returns its index along with the
  // barycentric coordinates of p. Points outside [0,1]^2 by more than tol
  // raise std::out_of_range.
  std::size_t locate(const Point &p, std::array<double, 3> &bary, double tol = 1e-12) const;

  std::array<double, 3> barycentric(std::size_t t, const Point &p) const;

private:
  std::size_t nx_;
  std::vector<Point> vertices_;
  std::vector<std::array<std::size_t, 3>> triangles_;
  std::vector<BoundaryFacet> facets_;
};

std::shared_ptr<const TriMesh> unit_square_mesh(std::size_t nx);

// Levels ordered finest first. parent_triangle[i][t] is the triangle of
// levels[i + 1] containing fine triangle t of levels[i].
struct MeshHierarchy
{
  std::vector<std::shared_ptr<const TriMesh>> levels;
  std::vector<std::vector<std::size_t>> parent_triangle;
};

MeshHierarchy mesh_hierarchy(std::size_t coarse_nx, std::size_t refinements);

}  // namespace sponet
