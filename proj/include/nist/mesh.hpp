// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace nist {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<std::uint32_t, 3>;

class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Indexed triangle mesh carrying both normal sets the renderer consumes:
/// per-vertex shading normals and per-face geometric normals.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> vertex_normals;
  std::vector<Vec3> face_normals;
};

/// A point on a mesh face in barycentric form (u weights corner 0, v corner 1,
/// w corner 2).
struct BaryPoint {
  std::uint32_t face = 0;
  Vec3 uvw = Vec3(1.0, 0.0, 0.0);
};

struct TessellationConfig {
  int level = 0;       // each edge is split into level + 1 segments
  double alpha = 0.75; // 0 = flat subdivision, 1 = fully projected
};

/// Checks index ranges, normal counts and unit lengths, and that face normals
/// agree with the triangle winding. Throws GeometryError on the first problem.
void validate(const Mesh& mesh);

void validate(const BaryPoint& point);
void validate(const TessellationConfig& config);

/// Builds face normals from winding and area-weighted vertex normals.
/// Zero-area triangles are rejected with their face index.
Mesh compute_normals(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

/// Orthogonal projection of `p` onto the plane through `v` with unit normal `n`.
Vec3 phong_project(const Vec3& p, const Vec3& v, const Vec3& n);

/// Phong-tessellated position of the barycentric point `uvw` on a triangle,
/// blended with the flat position by `alpha`.
Vec3 phong_point(std::span<const Vec3, 3> corners, std::span<const Vec3, 3> corner_normals,
                 const Vec3& uvw, double alpha);

/// Uniformly subdivides every face into (level + 1)^2 triangles and places
/// each lattice vertex with phong_point. Lattice vertices on edges and corners
/// are shared through the input vertex indices, so adjacent faces that share
/// vertices stay watertight. Output faces follow input face order, then
/// lattice order.
Mesh tessellate_phong(const Mesh& mesh, const TessellationConfig& config);

/// OBJ subset: `v`, `vn`, `f a//a b//b c//c`. Positions and normals are written
/// with 9 significant digits. Face normals are recomputed from winding on read.
void write_obj(const Mesh& mesh, const std::filesystem::path& path);
Mesh read_obj(const std::filesystem::path& path);

} // namespace nist
