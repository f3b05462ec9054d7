// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "nist/grad_check.hpp"
#include "nist/losses.hpp"
#include "nist/mesh.hpp"
#include "nist/shapes.hpp"

namespace nist {

namespace {

using ad::Tensor;
using T64 = Tensor<double>;

T64 random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  return T64::from(std::move(shape), std::move(v), true);
}

// Pseudo-random weights make the reduction sensitive to every output element.
T64 weighted_sum(const T64& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(y, random_tensor(y.shape(), rng).detach()));
}

std::string format(const char* fmt, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

class Runner {
public:
  explicit Runner(std::ostream& log) : log_(log) {}

  void check(const std::string& name, const std::function<SelftestCheck()>& body) {
    SelftestCheck c;
    try {
      c = body();
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.name = name;
    log_ << (c.passed ? "PASS " : "FAIL ") << name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
    results_.push_back(c);
  }

  void grad(const std::string& op, std::vector<T64> inputs, const ad::ScalarFn& f, double tolerance) {
    check("grad " + op, [&] {
      const ad::GradCheckResult r = ad::grad_check(f, inputs);
      return SelftestCheck{"", r.max_rel_error < tolerance,
                           format("max rel error %.3g, tolerance %.0e", r.max_rel_error, tolerance)};
    });
  }

  std::vector<SelftestCheck> results() const { return results_; }

private:
  std::ostream& log_;
  std::vector<SelftestCheck> results_;
};

} // namespace

std::vector<SelftestCheck> run_selftest(std::ostream& log) {
  Runner run(log);
  std::mt19937_64 rng(2024);

  // ---- operator gradients -------------------------------------------------
  for (int k : {1, 3, 7}) {
    const int size = k == 7 ? 8 : 5;
    run.grad("conv2d " + std::to_string(k) + "x" + std::to_string(k),
             {random_tensor({2, 3, size, size}, rng), random_tensor({4, 3, k, k}, rng), random_tensor({4}, rng)},
             [](const std::vector<T64>& in) { return weighted_sum(ad::conv2d(in[0], in[1], in[2]), 1); }, 1e-5);
  }
  {
    // keep inputs away from the kink at zero
    T64 x = random_tensor({1, 2, 4, 4}, rng, 0.1, 1.0);
    auto d = x.mutable_data();
    for (std::size_t i = 0; i < d.size(); i += 2) d[i] = -d[i];
    run.grad("leaky_relu", {x}, [](const std::vector<T64>& in) { return weighted_sum(ad::leaky_relu(in[0], 0.2), 2); },
             1e-5);
  }
  run.grad("tanh", {random_tensor({1, 2, 4, 4}, rng, -2.0, 2.0)},
           [](const std::vector<T64>& in) { return weighted_sum(ad::tanh(in[0]), 3); }, 1e-6);
  run.grad("softmax", {random_tensor({2, 5, 3, 3}, rng, -2.0, 2.0)},
           [](const std::vector<T64>& in) { return weighted_sum(ad::softmax(in[0], 1), 4); }, 1e-5);
  {
    // flows in pixel units sit at lattice + 0.1..0.9 so no tap changes under eps
    const int H = 6, W = 7;
    T64 x = random_tensor({1, 2, H, W}, rng);
    std::vector<double> flow(2 * H * W);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < H * W; ++i) {
        const double pixels = static_cast<int>(rng() % 3) - 1 + 0.1 + 0.8 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
        flow[c * H * W + i] = pixels * 2.0 / ((c == 0 ? W : H) - 1);
      }
    // interior pixels only, so clamping at the border never engages
    for (int y = 0; y < H; ++y)
      for (int x0 = 0; x0 < W; ++x0)
        if (y < 2 || y >= H - 2 || x0 < 2 || x0 >= W - 2) flow[y * W + x0] = flow[H * W + y * W + x0] = 0.3 / (W - 1);
    run.grad("grid_sample_bilinear", {x, T64::from({1, 2, H, W}, flow, true)},
             [](const std::vector<T64>& in) { return weighted_sum(ad::grid_sample_bilinear(in[0], in[1]), 5); }, 1e-4);
  }
  run.grad("downsample2", {random_tensor({1, 2, 4, 6}, rng)},
           [](const std::vector<T64>& in) { return weighted_sum(ad::downsample2(in[0]), 6); }, 1e-5);
  run.grad("upsample2", {random_tensor({1, 2, 3, 4}, rng)},
           [](const std::vector<T64>& in) { return weighted_sum(ad::upsample2(in[0]), 7); }, 1e-5);
  run.grad("concat", {random_tensor({1, 2, 3, 3}, rng), random_tensor({1, 3, 3, 3}, rng)},
           [](const std::vector<T64>& in) { return weighted_sum(ad::concat<double>({in[0], in[1]}, 1), 8); }, 1e-5);
  run.grad("add/sub/mul/scale", {random_tensor({1, 1, 3, 3}, rng), random_tensor({1, 1, 3, 3}, rng)},
           [](const std::vector<T64>& in) {
             return weighted_sum(ad::scale(ad::mul(ad::add(in[0], in[1]), ad::sub(in[0], in[1])), 0.5), 9);
           },
           1e-5);
  {
    const T64 label = random_tensor({1, 3, 6, 6}, rng, 0.0, 1.0).detach();
    const T64 input = random_tensor({1, 3, 6, 6}, rng, 0.0, 1.0).detach();
    const T64 pred = random_tensor({1, 3, 6, 6}, rng, 0.0, 1.0);
    run.grad("loss_rr", {pred}, [&](const std::vector<T64>& in) { return loss_rr(in[0], label, input, 1e-6); }, 1e-5);
    run.grad("loss_shade", {pred}, [&](const std::vector<T64>& in) { return loss_shade(in[0], label, 5); }, 1e-5);
    run.grad("loss_percep", {pred}, [&](const std::vector<T64>& in) { return loss_percep(in[0], label); }, 1e-5);
  }

  // ---- Phong tessellation invariants --------------------------------------
  run.check("phong plane residual", [&] {
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Vec3 p = Vec3::Random() * 3.0, v = Vec3::Random(), n = Vec3::Random().normalized();
      worst = std::max(worst, std::abs((phong_project(p, v, n) - v).dot(n)));
    }
    return SelftestCheck{"", worst < 1e-9, format("max residual %.3g", worst)};
  });
  run.check("phong corner fixed points", [&] {
    const std::array<Vec3, 3> c{Vec3(0, 0, 0), Vec3(1, 0, 0.2), Vec3(0, 1, -0.1)};
    const std::array<Vec3, 3> n{Vec3(-1, -1, 2).normalized(), Vec3(1, 0, 1).normalized(), Vec3(0, 1, 1).normalized()};
    bool exact = true;
    for (int k = 0; k < 3; ++k) {
      Vec3 uvw = Vec3::Zero();
      uvw[k] = 1.0;
      exact = exact && phong_point(c, n, uvw, 0.75) == c[k];
    }
    return SelftestCheck{"", exact, ""};
  });
  run.check("phong planarity preservation", [&] {
    Mesh quad = compute_normals({Vec3(0, 0, 0.5), Vec3(1, 0, 0.5), Vec3(1, 1, 0.5), Vec3(0, 1, 0.5)}, {{0, 1, 2}, {0, 2, 3}});
    const Mesh t = tessellate_phong(quad, {5, 1.0});
    double worst = 0.0;
    for (const Vec3& p : t.vertices) worst = std::max(worst, std::abs(p.z() - 0.5));
    return SelftestCheck{"", worst < 1e-9, format("max offset %.3g", worst)};
  });
  run.check("phong icosphere radial error", [&] {
    const Mesh sphere = shapes::icosphere(1);
    auto radial = [&](double alpha) {
      const Mesh t = tessellate_phong(sphere, {3, alpha});
      double sum = 0.0;
      for (const Vec3& p : t.vertices) sum += std::abs(p.norm() - 1.0);
      return sum / static_cast<double>(t.vertices.size());
    };
    const double smooth = radial(0.75), flat = radial(0.0);
    return SelftestCheck{"", smooth < flat, format("alpha 0.75: %.4g, alpha 0: %.4g", smooth, flat)};
  });

  // ---- warp and loss identities ---------------------------------------------
  run.check("warp zero-flow identity", [&] {
    const T64 x = random_tensor({1, 3, 5, 9}, rng).detach();
    const T64 y = ad::grid_sample_bilinear(x, T64::zeros({1, 2, 5, 9}));
    return SelftestCheck{"", std::equal(x.data().begin(), x.data().end(), y.data().begin()), ""};
  });
  run.check("warp one-pixel roll", [&] {
    const int H = 4, W = 9; // W - 1 = 8 keeps the pixel pitch exact
    const T64 x = random_tensor({1, 1, H, W}, rng).detach();
    std::vector<double> flow(2 * H * W, 0.0);
    for (int i = 0; i < H * W; ++i) flow[i] = 2.0 / (W - 1);
    const T64 y = ad::grid_sample_bilinear(x, T64::from({1, 2, H, W}, flow));
    bool exact = true;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c + 1 < W; ++c) exact = exact && y.data()[r * W + c] == x.data()[r * W + c + 1];
    return SelftestCheck{"", exact, ""};
  });
  run.check("loss identities", [&] {
    const T64 label = random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0).detach();
    const T64 pred = random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0).detach();
    const T64 input = random_tensor({1, 3, 4, 4}, rng, 0.0, 1.0).detach();
    const double rr_zero = loss_rr(label, label, input, 1e-6).item();
    const double shade_all = loss_shade(pred, label, 16).item();
    double l1 = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) l1 += std::abs(pred.data()[i] - label.data()[i]);
    l1 /= static_cast<double>(pred.numel());
    const T64 p2 = T64::from({1, 1, 1, 2}, {0.5, 0.2}), l2 = T64::from({1, 1, 1, 2}, {0.4, 0.2}),
              i2 = T64::from({1, 1, 1, 2}, {0.0, 0.2});
    const double two_pixel = loss_rr(p2, l2, i2, 1e-6).item();
    const double expected = 0.5 * (0.1 / (0.4 + 1e-6));
    const bool ok = rr_zero == 0.0 && std::abs(shade_all - l1) < 1e-12 && std::abs(two_pixel - expected) < 1e-12;
    return SelftestCheck{"", ok, format("two-pixel L_RR %.9g, shade-vs-L1 gap %.3g", two_pixel, shade_all - l1)};
  });
  return run.results();
}

} // namespace nist
