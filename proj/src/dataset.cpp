// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "nist/pfm.hpp"

namespace nist {
namespace {

// Portable uniform double in [0, 1); std distributions are not specified bit-exactly.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::mt19937_64 frame_rng(std::uint64_t seed, std::size_t index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

pfm::Image plane(const std::vector<float>& data, int width, int height, int channels) {
  return {width, height, channels, data};
}

std::vector<float> load(const std::filesystem::path& path, int channels, int& width,
                        int& height) {
  pfm::Image img = pfm::read(path);
  if (img.channels != channels) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(channels) +
                             " channel(s)");
  }
  if (width == 0) {
    width = img.width;
    height = img.height;
  } else if (img.width != width || img.height != height) {
    throw std::runtime_error(path.string() + ": resolution differs from the other channels");
  }
  return std::move(img.data);
}

} // namespace

Camera orbit_camera(std::uint64_t seed, std::size_t index, int width, int height,
                    const OrbitConfig& orbit) {
  std::mt19937_64 rng = frame_rng(seed, index, 0);
  const double radius = uniform(rng, orbit.radius_min, orbit.radius_max);
  const double elevation = uniform(rng, orbit.elevation_min, orbit.elevation_max);
  const double azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  Camera cam;
  cam.look_at = Vec3(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)) *
                orbit.target_jitter;
  cam.position = cam.look_at + radius * Vec3(std::cos(elevation) * std::sin(azimuth),
                                             std::sin(elevation),
                                             std::cos(elevation) * std::cos(azimuth));
  cam.up = Vec3(0.0, 1.0, 0.0);
  cam.vertical_fov = orbit.vertical_fov;
  cam.near = 0.1;
  cam.far = 10.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

void write_frame(const std::filesystem::path& dir, const GBufferFrame& frame) {
  frame.validate();
  std::filesystem::create_directories(dir);
  const int w = frame.width, h = frame.height;
  pfm::write(dir / "color.pfm", plane(frame.color, w, h, 3));
  pfm::write(dir / "depth.pfm", plane(frame.depth, w, h, 1));
  pfm::write(dir / "gnormal.pfm", plane(frame.gnormal, w, h, 3));
  pfm::write(dir / "snormal.pfm", plane(frame.snormal, w, h, 3));
  pfm::write(dir / "coverage.pfm", plane(frame.coverage, w, h, 1));
  pfm::write(dir / "label.pfm", plane(frame.label, w, h, 3));
}

GBufferFrame read_frame(const std::filesystem::path& dir) {
  GBufferFrame frame;
  int w = 0, h = 0;
  frame.color = load(dir / "color.pfm", 3, w, h);
  frame.depth = load(dir / "depth.pfm", 1, w, h);
  frame.gnormal = load(dir / "gnormal.pfm", 3, w, h);
  frame.snormal = load(dir / "snormal.pfm", 3, w, h);
  frame.coverage = load(dir / "coverage.pfm", 1, w, h);
  frame.label = load(dir / "label.pfm", 3, w, h);
  frame.width = w;
  frame.height = h;
  return frame;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "seed=" << manifest.seed << '\n'
     << "count=" << manifest.frames.size() << '\n'
     << "res=" << manifest.width << 'x' << manifest.height << '\n';
  for (const auto& f : manifest.frames) os << f << '\n';
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  long long count = -1;
  bool have_seed = false, have_res = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("seed=", 0) == 0) {
      m.seed = std::stoull(line.substr(5));
      have_seed = true;
    } else if (line.rfind("count=", 0) == 0) {
      count = std::stoll(line.substr(6));
    } else if (line.rfind("res=", 0) == 0) {
      if (std::sscanf(line.c_str() + 4, "%dx%d", &m.width, &m.height) != 2) {
        throw std::runtime_error(path.string() + ": malformed res line '" + line + "'");
      }
      have_res = true;
    } else {
      m.frames.push_back(line);
    }
  }
  if (!have_seed || !have_res || count < 0) {
    throw std::runtime_error(path.string() + ": missing seed/count/res header");
  }
  if (static_cast<std::size_t>(count) != m.frames.size()) {
    throw std::runtime_error(path.string() + ": count=" + std::to_string(count) + " but " +
                             std::to_string(m.frames.size()) + " frame entries");
  }
  return m;
}

Manifest generate_dataset(const SceneSpec& scene, int n_frames, std::uint64_t camera_path_seed,
                          const TessellationConfig& tess, const std::filesystem::path& out_dir,
                          int width, int height, const OrbitConfig& orbit) {
  if (n_frames < 0) throw std::invalid_argument("frame count must be >= 0");
  scene.validate();
  validate(tess);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  const Mesh mesh = build_mesh(scene.shape);
  const Mesh tessellated = tessellate_phong(mesh, tess);
  Manifest manifest;
  manifest.seed = camera_path_seed;
  manifest.width = width;
  manifest.height = height;
  manifest.root = out_dir;
  for (int i = 0; i < n_frames; ++i) {
    const Camera cam = orbit_camera(camera_path_seed, static_cast<std::size_t>(i), width, height, orbit);
    SceneSpec frame_scene = scene;
    if (scene.rng_seed != 0) {
      std::mt19937_64 rng = frame_rng(scene.rng_seed, static_cast<std::size_t>(i), 1);
      const Vec3 jitter(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
      frame_scene.light_dir = (scene.light_dir + jitter).normalized();
    }
    GBufferFrame frame;
    static_cast<RasterOutput&>(frame) = rasterize(mesh, cam, frame_scene);
    frame.label = rasterize(tessellated, cam, frame_scene).color;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d", i);
    write_frame(out_dir / name, frame);
    manifest.frames.emplace_back(name);
  }
  write_manifest(out_dir / "manifest.txt", manifest);
  return manifest;
}

} // namespace nist
