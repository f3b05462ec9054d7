// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Geometry>

#include "nist/shapes.hpp"

namespace nist {
namespace {

struct ClipVertex {
  Vec3 cam;    // camera-space position
  Vec3 world;  // world-space position
  Vec3 normal; // world-space shading normal (unnormalized after clipping)
};

struct ScreenVertex {
  double x, y; // pixel units, y down
  double depth; // view depth, > 0
  const ClipVertex* src;
};

// Edge function evaluated in a canonical endpoint order so the two triangles
// sharing an edge see exactly negated values.
double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  const bool swapped = std::tie(a.x, a.y) > std::tie(b.x, b.y);
  const ScreenVertex& p0 = swapped ? b : a;
  const ScreenVertex& p1 = swapped ? a : b;
  const double e = (px - p0.x) * (p1.y - p0.y) - (py - p0.y) * (p1.x - p0.x);
  return swapped ? -e : e;
}

// Tie-break for pixel centers exactly on an edge: of the two opposite
// traversals of a shared edge exactly one owns the pixel.
bool owns_edge(const ScreenVertex& a, const ScreenVertex& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

Vec3 albedo(const Material& material, const Vec3& world) {
  if (const auto* flat = std::get_if<scene::Flat>(&material)) return flat->color;
  const auto& checker = std::get<scene::Checker>(material);
  const auto cell = [&](double v) { return static_cast<long long>(std::floor(v / checker.scale)); };
  const long long parity = cell(world.x()) + cell(world.y()) + cell(world.z());
  return (parity & 1LL) ? checker.color_b : checker.color_a;
}

std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri, double near) {
  std::vector<ClipVertex> out;
  out.reserve(4);
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const double da = -a.cam.z() - near, db = -b.cam.z() - near;
    if (da >= 0.0) out.push_back(a);
    if ((da >= 0.0) != (db >= 0.0)) {
      const double t = da / (da - db);
      out.push_back({a.cam + t * (b.cam - a.cam), a.world + t * (b.world - a.world),
                     a.normal + t * (b.normal - a.normal)});
    }
  }
  return out;
}

} // namespace

void Camera::validate() const {
  if (!(near > 0.0) || !(far > near)) throw std::invalid_argument("camera requires 0 < near < far");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera resolution must be positive");
  if (!(vertical_fov > 0.0 && vertical_fov < 3.14)) {
    throw std::invalid_argument("camera vertical_fov must lie in (0, pi)");
  }
  const Vec3 forward = look_at - position;
  if (forward.norm() == 0.0) throw std::invalid_argument("camera position equals look_at");
  if (forward.normalized().cross(up.normalized()).norm() < 1e-9) {
    throw std::invalid_argument("camera up is parallel to the view direction");
  }
}

Eigen::Matrix3d Camera::rotation() const {
  const Vec3 z_axis = (position - look_at).normalized();
  const Vec3 x_axis = up.cross(z_axis).normalized();
  const Vec3 y_axis = z_axis.cross(x_axis);
  Eigen::Matrix3d r;
  r.row(0) = x_axis.transpose();
  r.row(1) = y_axis.transpose();
  r.row(2) = z_axis.transpose();
  return r;
}

void SceneSpec::validate() const {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, scene::Icosphere>) {
          if (s.subdivisions < 0) throw std::invalid_argument("icosphere subdivisions must be >= 0");
        } else if constexpr (std::is_same_v<S, scene::Torus>) {
          if (s.segments_u < 3 || s.segments_v < 3) {
            throw std::invalid_argument("torus segment counts must be >= 3");
          }
        } else if constexpr (std::is_same_v<S, scene::Cylinder> ||
                             std::is_same_v<S, scene::Capsule>) {
          if (s.segments < 3) throw std::invalid_argument("segment count must be >= 3");
        }
      },
      shape);
  if (std::abs(light_dir.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("light_dir must be a unit vector");
  }
  if (!(ambient >= 0.0 && ambient <= 1.0)) throw std::invalid_argument("ambient must lie in [0, 1]");
  if (!(background >= 0.0 && background <= 1.0)) {
    throw std::invalid_argument("background must lie in [0, 1]");
  }
}

Shape parse_shape(const std::string& name) {
  if (name.rfind("icosphere", 0) == 0) {
    const std::string level = name.substr(9);
    if (level.empty()) return scene::Icosphere{1};
    try {
      std::size_t used = 0;
      const int subdiv = std::stoi(level, &used);
      if (used == level.size() && subdiv >= 0) return scene::Icosphere{subdiv};
    } catch (const std::exception&) {
    }
  }
  if (name == "torus") return scene::Torus{};
  if (name == "cylinder") return scene::Cylinder{};
  if (name == "capsule") return scene::Capsule{};
  if (name == "bar_grid") return scene::BarGrid{};
  throw std::invalid_argument("unknown scene shape '" + name + "'");
}

std::string shape_name(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, scene::Icosphere>) {
          return "icosphere" + std::to_string(s.subdivisions);
        } else if constexpr (std::is_same_v<S, scene::Torus>) {
          return "torus";
        } else if constexpr (std::is_same_v<S, scene::Cylinder>) {
          return "cylinder";
        } else if constexpr (std::is_same_v<S, scene::Capsule>) {
          return "capsule";
        } else {
          return "bar_grid";
        }
      },
      shape);
}

Mesh build_mesh(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> Mesh {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, scene::Icosphere>) {
          return shapes::icosphere(s.subdivisions);
        } else if constexpr (std::is_same_v<S, scene::Torus>) {
          return shapes::torus(s.segments_u, s.segments_v);
        } else if constexpr (std::is_same_v<S, scene::Cylinder>) {
          return shapes::cylinder(s.segments);
        } else if constexpr (std::is_same_v<S, scene::Capsule>) {
          return shapes::capsule(s.segments);
        } else {
          return shapes::bar_grid();
        }
      },
      shape);
}

void GBufferFrame::validate() const {
  const std::size_t n = pixels();
  if (color.size() != 3 * n || depth.size() != n || gnormal.size() != 3 * n ||
      snormal.size() != 3 * n || coverage.size() != n || label.size() != 3 * n) {
    throw std::invalid_argument("frame channels do not share a common resolution");
  }
}

RasterOutput rasterize(const Mesh& mesh, const Camera& camera, const SceneSpec& scene) {
  camera.validate();
  scene.validate();
  if (mesh.vertex_normals.size() != mesh.vertices.size() ||
      mesh.face_normals.size() != mesh.triangles.size()) {
    throw GeometryError("rasterize requires vertex and face normals");
  }
  const int W = camera.width, H = camera.height;
  const std::size_t npix = static_cast<std::size_t>(W) * H;
  RasterOutput out;
  out.width = W;
  out.height = H;
  out.color.assign(3 * npix, static_cast<float>(scene.background));
  out.depth.assign(npix, 1.0f);
  out.gnormal.assign(3 * npix, 0.0f);
  out.snormal.assign(3 * npix, 0.0f);
  out.coverage.assign(npix, 0.0f);

  const Eigen::Matrix3d rot = camera.rotation();
  const double focal = 1.0 / std::tan(camera.vertical_fov / 2.0);
  const double aspect = static_cast<double>(W) / H;

  std::vector<double> zbuf(npix, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> winner(npix, -1);
  // per-pixel perspective-correct barycentrics against the winning sub-triangle
  std::vector<Vec3> world_pos(npix), shade_normal(npix);

  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& tri = mesh.triangles[f];
    std::array<ClipVertex, 3> cv;
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = mesh.vertices[tri[i]];
      cv[i] = {rot * (p - camera.position), p, mesh.vertex_normals[tri[i]]};
    }
    const std::vector<ClipVertex> poly = clip_near(cv, camera.near);
    if (poly.size() < 3) continue;

    std::vector<ScreenVertex> sv;
    sv.reserve(poly.size());
    for (const auto& v : poly) {
      const double d = -v.cam.z();
      sv.push_back({(v.cam.x() * focal / (aspect * d) + 1.0) * 0.5 * W,
                    (1.0 - v.cam.y() * focal / d) * 0.5 * H, d, &v});
    }

    for (std::size_t k = 1; k + 1 < sv.size(); ++k) {
      std::array<ScreenVertex, 3> s = {sv[0], sv[k], sv[k + 1]};
      double area = edge(s[0], s[1], s[2].x, s[2].y);
      if (area == 0.0 || !std::isfinite(area)) continue;
      if (area < 0.0) {
        std::swap(s[1], s[2]);
        area = -area;
      }
      const double minx = std::min({s[0].x, s[1].x, s[2].x});
      const double maxx = std::max({s[0].x, s[1].x, s[2].x});
      const double miny = std::min({s[0].y, s[1].y, s[2].y});
      const double maxy = std::max({s[0].y, s[1].y, s[2].y});
      const int x0 = std::max(0, static_cast<int>(std::floor(minx - 0.5)));
      const int x1 = std::min(W - 1, static_cast<int>(std::ceil(maxx - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::floor(miny - 0.5)));
      const int y1 = std::min(H - 1, static_cast<int>(std::ceil(maxy - 0.5)));
      if (x0 > x1 || y0 > y1) continue;
      const bool own0 = owns_edge(s[1], s[2]);
      const bool own1 = owns_edge(s[2], s[0]);
      const bool own2 = owns_edge(s[0], s[1]);

      for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
          const double px = x + 0.5;
          const double e0 = edge(s[1], s[2], px, py);
          const double e1 = edge(s[2], s[0], px, py);
          const double e2 = edge(s[0], s[1], px, py);
          if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
          if ((e0 == 0.0 && !own0) || (e1 == 0.0 && !own1) || (e2 == 0.0 && !own2)) continue;
          const double b0 = e0 / area / s[0].depth;
          const double b1 = e1 / area / s[1].depth;
          const double b2 = e2 / area / s[2].depth;
          const double inv = b0 + b1 + b2;
          const double depth = 1.0 / inv;
          const std::size_t idx = static_cast<std::size_t>(y) * W + x;
          if (!(depth < zbuf[idx])) continue;
          zbuf[idx] = depth;
          winner[idx] = static_cast<std::int64_t>(f);
          const double w0 = b0 / inv, w1 = b1 / inv, w2 = b2 / inv;
          world_pos[idx] = w0 * s[0].src->world + w1 * s[1].src->world + w2 * s[2].src->world;
          shade_normal[idx] = w0 * s[0].src->normal + w1 * s[1].src->normal + w2 * s[2].src->normal;
        }
      }
    }
  }

  const double range = camera.far - camera.near;
  for (std::size_t idx = 0; idx < npix; ++idx) {
    if (winner[idx] < 0) continue;
    Vec3 sn = shade_normal[idx];
    const double len = sn.norm();
    sn = len > 0.0 ? Vec3(sn / len) : mesh.face_normals[winner[idx]];
    const Vec3 gn = mesh.face_normals[winner[idx]];
    const double lambert = std::max(0.0, sn.dot(scene.light_dir));
    const double shade = std::clamp(scene.ambient + (1.0 - scene.ambient) * lambert, 0.0, 1.0);
    const Vec3 c = shade * albedo(scene.material, world_pos[idx]);
    const Vec3 gc = rot * gn;
    const Vec3 sc = rot * sn;
    for (int ch = 0; ch < 3; ++ch) {
      out.color[3 * idx + ch] = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
      out.gnormal[3 * idx + ch] = static_cast<float>(gc[ch]);
      out.snormal[3 * idx + ch] = static_cast<float>(sc[ch]);
    }
    out.depth[idx] = static_cast<float>(std::clamp((zbuf[idx] - camera.near) / range, 0.0, 1.0));
    out.coverage[idx] = 1.0f;
  }
  return out;
}

GBufferFrame make_pair(const Mesh& mesh, const SceneSpec& scene, const Camera& camera,
                       const TessellationConfig& tess) {
  GBufferFrame frame;
  static_cast<RasterOutput&>(frame) = rasterize(mesh, camera, scene);
  frame.label = rasterize(tessellate_phong(mesh, tess), camera, scene).color;
  return frame;
}

GBufferFrame make_pair(const SceneSpec& scene, const Camera& camera,
                       const TessellationConfig& tess) {
  return make_pair(build_mesh(scene.shape), scene, camera, tess);
}

} // namespace nist
