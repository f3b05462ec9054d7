// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/shapes.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace nist::shapes {
namespace {

void require_segments(int segments, const char* what) {
  if (segments < 3) {
    throw GeometryError(std::string(what) + " needs at least 3 segments");
  }
}

// Fills face normals from winding; vertex normals must already be set.
Mesh finish(std::vector<Vec3> vertices, std::vector<Vec3> normals,
            std::vector<Triangle> triangles) {
  Mesh mesh = compute_normals(std::move(vertices), std::move(triangles));
  mesh.vertex_normals = std::move(normals);
  for (auto& n : mesh.vertex_normals) n.normalize();
  return mesh;
}

} // namespace

Mesh icosphere(int subdivisions) {
  if (subdivisions < 0) throw GeometryError("icosphere subdivisions must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoints.try_emplace(key, static_cast<std::uint32_t>(verts.size()));
      if (inserted) verts.push_back((verts[a] + verts[b]).normalized());
      return it->second;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& [a, b, c] : tris) {
      const auto ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  std::vector<Vec3> normals = verts;
  return finish(std::move(verts), std::move(normals), std::move(tris));
}

Mesh torus(int segments_u, int segments_v) {
  require_segments(segments_u, "torus");
  require_segments(segments_v, "torus");
  constexpr double major = 0.7, minor = 0.3;
  std::vector<Vec3> verts, normals;
  for (int i = 0; i < segments_u; ++i) {
    const double u = 2.0 * std::numbers::pi * i / segments_u;
    for (int j = 0; j < segments_v; ++j) {
      const double v = 2.0 * std::numbers::pi * j / segments_v;
      const Vec3 n(std::cos(v) * std::cos(u), std::sin(v), std::cos(v) * std::sin(u));
      const Vec3 center(major * std::cos(u), 0.0, major * std::sin(u));
      verts.push_back(center + minor * n);
      normals.push_back(n);
    }
  }
  std::vector<Triangle> tris;
  auto id = [&](int i, int j) {
    return static_cast<std::uint32_t>((i % segments_u) * segments_v + (j % segments_v));
  };
  for (int i = 0; i < segments_u; ++i) {
    for (int j = 0; j < segments_v; ++j) {
      tris.push_back({id(i, j), id(i, j + 1), id(i + 1, j)});
      tris.push_back({id(i + 1, j), id(i, j + 1), id(i + 1, j + 1)});
    }
  }
  return finish(std::move(verts), std::move(normals), std::move(tris));
}

Mesh cylinder(int segments) {
  require_segments(segments, "cylinder");
  constexpr double radius = 0.6, half = 0.8;
  std::vector<Vec3> verts, normals;
  std::vector<Triangle> tris;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    const Vec3 radial(std::cos(a), 0.0, -std::sin(a));
    verts.push_back(Vec3(0, -half, 0) + radius * radial);
    verts.push_back(Vec3(0, half, 0) + radius * radial);
    normals.push_back(radial);
    normals.push_back(radial);
  }
  auto side = [&](int i, int top) { return static_cast<std::uint32_t>(2 * (i % segments) + top); };
  for (int i = 0; i < segments; ++i) {
    tris.push_back({side(i, 0), side(i + 1, 0), side(i, 1)});
    tris.push_back({side(i, 1), side(i + 1, 0), side(i + 1, 1)});
  }
  for (int cap = 0; cap < 2; ++cap) {
    const double y = cap ? half : -half;
    const Vec3 n(0.0, cap ? 1.0 : -1.0, 0.0);
    const auto center = static_cast<std::uint32_t>(verts.size());
    verts.emplace_back(0.0, y, 0.0);
    normals.push_back(n);
    for (int i = 0; i < segments; ++i) {
      const double a = 2.0 * std::numbers::pi * i / segments;
      verts.emplace_back(radius * std::cos(a), y, -radius * std::sin(a));
      normals.push_back(n);
    }
    for (int i = 0; i < segments; ++i) {
      const auto a = center + 1 + static_cast<std::uint32_t>(i);
      const auto b = center + 1 + static_cast<std::uint32_t>((i + 1) % segments);
      if (cap) {
        tris.push_back({center, a, b});
      } else {
        tris.push_back({center, b, a});
      }
    }
  }
  return finish(std::move(verts), std::move(normals), std::move(tris));
}

Mesh capsule(int segments) {
  require_segments(segments, "capsule");
  constexpr double radius = 0.5, half = 0.5;
  const int rings = std::max(2, segments / 4); // latitude rings per hemisphere
  std::vector<Vec3> verts, normals;
  // latitude rows from the north pole ring to the south pole ring
  std::vector<std::pair<double, double>> rows; // (latitude, y offset)
  for (int r = 1; r <= rings; ++r) rows.emplace_back(std::numbers::pi / 2 * (1.0 - double(r) / rings), half);
  for (int r = 0; r < rings; ++r) rows.emplace_back(-std::numbers::pi / 2 * double(r) / rings, -half);
  verts.emplace_back(0.0, half + radius, 0.0);
  normals.emplace_back(0.0, 1.0, 0.0);
  for (const auto& [lat, yoff] : rows) {
    for (int i = 0; i < segments; ++i) {
      const double a = 2.0 * std::numbers::pi * i / segments;
      const Vec3 n(std::cos(lat) * std::cos(a), std::sin(lat), -std::cos(lat) * std::sin(a));
      verts.push_back(Vec3(0.0, yoff, 0.0) + radius * n);
      normals.push_back(n);
    }
  }
  const auto south = static_cast<std::uint32_t>(verts.size());
  verts.emplace_back(0.0, -half - radius, 0.0);
  normals.emplace_back(0.0, -1.0, 0.0);

  std::vector<Triangle> tris;
  auto ring = [&](int row, int i) {
    return static_cast<std::uint32_t>(1 + row * segments + (i % segments));
  };
  const int nrows = static_cast<int>(rows.size());
  for (int i = 0; i < segments; ++i) tris.push_back({0, ring(0, i), ring(0, i + 1)});
  for (int r = 0; r + 1 < nrows; ++r) {
    for (int i = 0; i < segments; ++i) {
      tris.push_back({ring(r, i), ring(r + 1, i), ring(r, i + 1)});
      tris.push_back({ring(r, i + 1), ring(r + 1, i), ring(r + 1, i + 1)});
    }
  }
  for (int i = 0; i < segments; ++i) tris.push_back({south, ring(nrows - 1, i + 1), ring(nrows - 1, i)});
  return finish(std::move(verts), std::move(normals), std::move(tris));
}

Mesh bar_grid() {
  std::vector<Vec3> verts, normals;
  std::vector<Triangle> tris;
  constexpr int bars = 4;
  for (int b = 0; b < bars; ++b) {
    const double x0 = -0.9 + 0.5 * b, x1 = x0 + 0.3;
    const auto base = static_cast<std::uint32_t>(verts.size());
    verts.emplace_back(x0, -0.9, 0.0);
    verts.emplace_back(x1, -0.9, 0.0);
    verts.emplace_back(x1, 0.9, 0.0);
    verts.emplace_back(x0, 0.9, 0.0);
    for (int k = 0; k < 4; ++k) normals.emplace_back(0.0, 0.0, 1.0);
    tris.push_back({base, base + 1, base + 2});
    tris.push_back({base, base + 2, base + 3});
  }
  return finish(std::move(verts), std::move(normals), std::move(tris));
}

} // namespace nist::shapes
