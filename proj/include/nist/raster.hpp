// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "nist/mesh.hpp"

namespace nist {

/// Right-handed pinhole camera looking down its local -z axis.
struct Camera {
  Vec3 position = Vec3(0.0, 0.0, 3.0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3(0.0, 1.0, 0.0);
  double vertical_fov = 0.7; // radians
  double near = 0.1;
  double far = 10.0;
  int width = 64;
  int height = 64;

  void validate() const;
  /// Rows are the camera x, y, z axes in world space (world -> camera rotation).
  Eigen::Matrix3d rotation() const;
};

namespace scene {
struct Icosphere { int subdivisions = 1; };
struct Torus { int segments_u = 12; int segments_v = 8; };
struct Cylinder { int segments = 12; };
struct Capsule { int segments = 12; };
struct BarGrid {};

struct Flat { Vec3 color = Vec3(0.9, 0.55, 0.2); };
struct Checker {
  double scale = 0.25;
  Vec3 color_a = Vec3(0.9, 0.9, 0.85);
  Vec3 color_b = Vec3(0.2, 0.35, 0.7);
};
} // namespace scene

using Shape = std::variant<scene::Icosphere, scene::Torus, scene::Cylinder, scene::Capsule,
                           scene::BarGrid>;
using Material = std::variant<scene::Flat, scene::Checker>;

struct SceneSpec {
  Shape shape = scene::Icosphere{1};
  Material material = scene::Flat{};
  Vec3 light_dir = Vec3(0.3, 0.8, 0.52).normalized(); // toward the light
  double ambient = 0.25;
  double background = 0.5;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Parses names such as "icosphere1", "torus", "cylinder", "capsule", "bar_grid".
Shape parse_shape(const std::string& name);
std::string shape_name(const Shape& shape);
Mesh build_mesh(const Shape& shape);

/// Per-pixel render channels, row-major with row 0 at the top of the image.
/// Three-channel planes are interleaved (x, y, z per pixel).
struct RasterOutput {
  int width = 0;
  int height = 0;
  std::vector<float> color;    // 3 per pixel
  std::vector<float> depth;    // 1 per pixel, 1 = background
  std::vector<float> gnormal;  // 3 per pixel, camera space
  std::vector<float> snormal;  // 3 per pixel, camera space
  std::vector<float> coverage; // 1 per pixel, 0 or 1

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

/// Input G-buffer plus the label image rendered from tessellated geometry.
struct GBufferFrame : RasterOutput {
  std::vector<float> label; // 3 per pixel

  void validate() const;
};

/// One-sample-per-pixel z-buffered rasterization with near-plane clipping.
RasterOutput rasterize(const Mesh& mesh, const Camera& camera, const SceneSpec& scene);

/// Input channels from the low-poly mesh, label color from its Phong
/// tessellation under the same camera, material and light.
GBufferFrame make_pair(const SceneSpec& scene, const Camera& camera,
                       const TessellationConfig& tess);
GBufferFrame make_pair(const Mesh& mesh, const SceneSpec& scene, const Camera& camera,
                       const TessellationConfig& tess);

} // namespace nist
