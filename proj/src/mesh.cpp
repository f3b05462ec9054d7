// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace nist {
namespace {

constexpr double kUnitTolerance = 1e-6;

std::string face_label(std::size_t f) { return "face " + std::to_string(f); }

bool is_unit(const Vec3& n) { return std::abs(n.norm() - 1.0) <= kUnitTolerance; }

Vec3 winding_normal(const Mesh& mesh, std::size_t f) {
  const auto& t = mesh.triangles[f];
  const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
  const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
  return e1.cross(e2);
}

// Identifies a lattice sample independently of which face generated it:
// corners by vertex index, edge samples by (lower vertex, upper vertex, steps
// from the lower vertex), interior samples by (face, a, b).
struct LatticeKey {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  int kind = 0;
  auto operator<=>(const LatticeKey&) const = default;
};

struct LatticeKeyHash {
  std::size_t operator()(const LatticeKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::uint64_t v : {k.a, k.b, k.c, static_cast<std::uint64_t>(k.kind)}) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

} // namespace

void validate(const Mesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  if (mesh.vertex_normals.size() != nv) {
    throw GeometryError("vertex normal count " + std::to_string(mesh.vertex_normals.size()) +
                        " does not match vertex count " + std::to_string(nv));
  }
  if (mesh.face_normals.size() != mesh.triangles.size()) {
    throw GeometryError("face normal count does not match triangle count");
  }
  for (std::size_t i = 0; i < nv; ++i) {
    if (!is_unit(mesh.vertex_normals[i])) {
      throw GeometryError("vertex normal " + std::to_string(i) + " is not unit length");
    }
  }
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    for (auto idx : mesh.triangles[f]) {
      if (idx >= nv) {
        throw GeometryError(face_label(f) + " references vertex " + std::to_string(idx) +
                            " out of range");
      }
    }
    if (!is_unit(mesh.face_normals[f])) {
      throw GeometryError(face_label(f) + " normal is not unit length");
    }
    const Vec3 w = winding_normal(mesh, f);
    if (w.norm() == 0.0 || (w.normalized() - mesh.face_normals[f]).norm() > 1e-6) {
      throw GeometryError(face_label(f) + " normal disagrees with its winding");
    }
  }
}

void validate(const BaryPoint& point) {
  const Vec3& b = point.uvw;
  if (b.minCoeff() < 0.0 || std::abs(b.sum() - 1.0) > 1e-9) {
    throw GeometryError("barycentric coordinates must be nonnegative and sum to 1");
  }
}

void validate(const TessellationConfig& config) {
  if (config.level < 0) throw GeometryError("tessellation level must be >= 0");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw GeometryError("tessellation alpha must lie in [0, 1]");
  }
}

Mesh compute_normals(std::vector<Vec3> vertices, std::vector<Triangle> triangles) {
  Mesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);
  const std::size_t nv = mesh.vertices.size();
  std::vector<Vec3> accum(nv, Vec3::Zero());
  mesh.face_normals.reserve(mesh.triangles.size());
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    for (auto idx : mesh.triangles[f]) {
      if (idx >= nv) {
        throw GeometryError(face_label(f) + " references vertex " + std::to_string(idx) +
                            " out of range");
      }
    }
    // |cross| is twice the area, so accumulating it weights by area.
    const Vec3 c = winding_normal(mesh, f);
    const double len = c.norm();
    if (!(len > 0.0)) throw GeometryError("degenerate triangle at " + face_label(f));
    mesh.face_normals.push_back(c / len);
    for (auto idx : mesh.triangles[f]) accum[idx] += c;
  }
  mesh.vertex_normals.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    const double len = accum[i].norm();
    if (!(len > 0.0)) {
      throw GeometryError("vertex " + std::to_string(i) + " has no incident face area");
    }
    mesh.vertex_normals[i] = accum[i] / len;
  }
  return mesh;
}

Vec3 phong_project(const Vec3& p, const Vec3& v, const Vec3& n) {
  if (!is_unit(n)) throw GeometryError("phong_project requires a unit normal");
  return p - (p - v).dot(n) * n;
}

Vec3 phong_point(std::span<const Vec3, 3> corners, std::span<const Vec3, 3> corner_normals,
                 const Vec3& uvw, double alpha) {
  for (int i = 0; i < 3; ++i) {
    if (uvw[i] == 1.0) return corners[i];
  }
  const Vec3 p = uvw[0] * corners[0] + uvw[1] * corners[1] + uvw[2] * corners[2];
  // sum_i w_i * pi_i(p) == p - sum_i w_i ((p - v_i).n_i) n_i since the weights
  // sum to one; the offset form keeps self-consistent faces bit-exact.
  Vec3 offset = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    if (uvw[i] == 0.0) continue;
    offset += uvw[i] * (p - phong_project(p, corners[i], corner_normals[i]));
  }
  return p - alpha * offset;
}

Mesh tessellate_phong(const Mesh& mesh, const TessellationConfig& config) {
  validate(config);
  const int n = config.level + 1;
  Mesh out;
  std::unordered_map<LatticeKey, std::uint32_t, LatticeKeyHash> shared;

  auto lattice_vertex = [&](std::size_t f, int a, int b) -> std::uint32_t {
    const auto& tri = mesh.triangles[f];
    const int c = n - a - b; // steps toward corner 0
    // counts[i] = lattice steps toward corner i
    const std::array<int, 3> counts = {c, a, b};
    LatticeKey key;
    int nonzero = 0;
    for (int i = 0; i < 3; ++i) nonzero += counts[i] != 0 ? 1 : 0;
    if (nonzero == 1) {
      const int i = counts[0] ? 0 : (counts[1] ? 1 : 2);
      key = {tri[i], 0, 0, 0};
    } else if (nonzero == 2) {
      int i0 = -1, i1 = -1;
      for (int i = 0; i < 3; ++i) {
        if (counts[i] == 0) continue;
        (i0 < 0 ? i0 : i1) = i;
      }
      // orient by vertex index so both incident faces agree
      if (tri[i0] > tri[i1]) std::swap(i0, i1);
      key = {tri[i0], tri[i1], static_cast<std::uint64_t>(counts[i1]), 1};
    } else {
      key = {f, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b), 2};
    }
    auto it = shared.find(key);
    if (it != shared.end()) return it->second;

    const std::array<Vec3, 3> corners = {mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                         mesh.vertices[tri[2]]};
    const std::array<Vec3, 3> normals = {mesh.vertex_normals[tri[0]],
                                         mesh.vertex_normals[tri[1]],
                                         mesh.vertex_normals[tri[2]]};
    const Vec3 uvw(double(c) / n, double(a) / n, double(b) / n);
    const Vec3 pos = phong_point(corners, normals, uvw, config.alpha);
    Vec3 nrm = uvw[0] * normals[0] + uvw[1] * normals[1] + uvw[2] * normals[2];
    nrm.normalize();
    const auto index = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(pos);
    out.vertex_normals.push_back(nrm);
    shared.emplace(key, index);
    return index;
  };

  out.triangles.reserve(mesh.triangles.size() * static_cast<std::size_t>(n * n));
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    for (int b = 0; b < n; ++b) {
      for (int a = 0; a + b < n; ++a) {
        out.triangles.push_back(
            {lattice_vertex(f, a, b), lattice_vertex(f, a + 1, b), lattice_vertex(f, a, b + 1)});
        if (a + b < n - 1) {
          out.triangles.push_back({lattice_vertex(f, a + 1, b), lattice_vertex(f, a + 1, b + 1),
                                   lattice_vertex(f, a, b + 1)});
        }
      }
    }
  }

  out.face_normals.reserve(out.triangles.size());
  for (std::size_t f = 0; f < out.triangles.size(); ++f) {
    const Vec3 c = winding_normal(out, f);
    const double len = c.norm();
    // a sub-triangle can only collapse if the source face was already sliver-thin
    out.face_normals.push_back(len > 0.0 ? Vec3(c / len)
                                         : mesh.face_normals[f / static_cast<std::size_t>(n * n)]);
  }
  return out;
}

void write_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char line[160];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof line, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    os << line;
  }
  for (const auto& n : mesh.vertex_normals) {
    std::snprintf(line, sizeof line, "vn %.9g %.9g %.9g\n", n.x(), n.y(), n.z());
    os << line;
  }
  for (const auto& t : mesh.triangles) {
    os << "f " << t[0] + 1 << "//" << t[0] + 1 << ' ' << t[1] + 1 << "//" << t[1] + 1 << ' '
       << t[2] + 1 << "//" << t[2] + 1 << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Mesh read_obj(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<Vec3> positions, normals;
  std::vector<std::array<std::pair<std::uint32_t, std::uint32_t>, 3>> faces;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw GeometryError(path.string() + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v" || tag == "vn") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("expected three coordinates");
      (tag == "v" ? positions : normals).emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<std::pair<std::uint32_t, std::uint32_t>, 3> face;
      for (auto& corner : face) {
        std::string tok;
        if (!(ls >> tok)) fail("faces must be triangles");
        const auto sep = tok.find("//");
        if (sep == std::string::npos) fail("face corners must use the v//vn form");
        try {
          corner = {static_cast<std::uint32_t>(std::stoul(tok.substr(0, sep)) - 1),
                    static_cast<std::uint32_t>(std::stoul(tok.substr(sep + 2)) - 1)};
        } catch (const std::exception&) {
          fail("malformed face index '" + tok + "'");
        }
      }
      std::string extra;
      if (ls >> extra) fail("faces must be triangles");
      faces.push_back(face);
    }
  }

  bool aligned = normals.size() == positions.size();
  for (const auto& face : faces) {
    for (const auto& [vi, ni] : face) {
      if (vi >= positions.size() || ni >= normals.size()) fail("face index out of range");
      aligned = aligned && vi == ni;
    }
  }

  Mesh mesh;
  if (aligned) {
    mesh.vertices = std::move(positions);
    mesh.vertex_normals = std::move(normals);
    for (const auto& face : faces) {
      mesh.triangles.push_back({face[0].first, face[1].first, face[2].first});
    }
  } else {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> remap;
    for (const auto& face : faces) {
      Triangle t{};
      for (int i = 0; i < 3; ++i) {
        auto [it, inserted] =
            remap.try_emplace(face[i], static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) {
          mesh.vertices.push_back(positions[face[i].first]);
          mesh.vertex_normals.push_back(normals[face[i].second]);
        }
        t[i] = it->second;
      }
      mesh.triangles.push_back(t);
    }
  }
  for (auto& n : mesh.vertex_normals) {
    if (!is_unit(n)) n.normalize();
  }
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const Vec3 c = winding_normal(mesh, f);
    if (!(c.norm() > 0.0)) throw GeometryError("degenerate triangle at " + face_label(f));
    mesh.face_normals.push_back(c.normalized());
  }
  return mesh;
}

} // namespace nist
