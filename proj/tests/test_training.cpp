// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "nist/adam.hpp"
#include "nist/checkpoint.hpp"
#include "nist/config.hpp"
#include "nist/dataset.hpp"
#include "nist/losses.hpp"
#include "nist/pfm.hpp"
#include "nist/train.hpp"

using nist::ad::Tensor;
using T64 = Tensor<double>;
namespace ad = nist::ad;
namespace fs = std::filesystem;

namespace {

T64 image(std::vector<double> v, int h, int w, int c = 1) { return T64::from({1, c, h, w}, std::move(v)); }

T64 random_image(int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(static_cast<std::size_t>(c) * h * w);
  for (auto& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return T64::from({1, c, h, w}, std::move(v));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nist::TrainConfig tiny_config() {
  nist::TrainConfig c;
  c.model.guidance_channels = c.model.deform_channels = c.model.color_channels = 4;
  c.crop = 32;
  c.batch_size = 2;
  c.steps = 3;
  c.checkpoint_interval = 2;
  return c;
}

const fs::path& tiny_dataset() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "nist_train_test_data";
    fs::remove_all(d);
    nist::generate_dataset(nist::SceneSpec{}, 4, 3, {4, 0.75}, d, 48, 48);
    return d;
  }();
  return dir;
}

} // namespace

TEST_CASE("residual-relative loss examples") {
  const T64 l = random_image(3, 4, 4, 1), in = random_image(3, 4, 4, 2);
  CHECK(nist::loss_rr(l, l, in, 1e-6).item() == 0.0);
  // pred = input and |d| >> eps: every term d / (d + eps) is just under one
  const T64 far_label = image({0.9, 0.8}, 1, 2), near_input = image({0.1, 0.2}, 1, 2);
  const double v = nist::loss_rr(near_input, far_label, near_input, 1e-6).item();
  CHECK(v < 1.0);
  CHECK(v > 1.0 - 1e-5);
  const double two = nist::loss_rr(image({0.5, 0.2}, 1, 2), image({0.4, 0.2}, 1, 2), image({0.0, 0.2}, 1, 2), 1e-6).item();
  CHECK(std::abs(two - 0.5 * (0.1 / (0.4 + 1e-6) + 0.0 / (0.0 + 1e-6))) < 1e-12);
  CHECK(std::abs(two - 0.125) < 1e-6);
  // doubling |pred - label| doubles each term
  const T64 p = random_image(3, 4, 4, 3);
  std::vector<double> doubled(p.numel());
  for (std::size_t i = 0; i < doubled.size(); ++i) doubled[i] = l.data()[i] + 2.0 * (p.data()[i] - l.data()[i]);
  const double once = nist::loss_rr(p, l, in, 1e-6).item();
  const double twice = nist::loss_rr(T64::from(p.shape(), doubled), l, in, 1e-6).item();
  CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-12));
  CHECK_THROWS_AS(nist::loss_rr(p, random_image(3, 4, 5, 4), in, 1e-6), ad::ShapeError);
}

TEST_CASE("top-k shading loss examples") {
  // single-channel residuals 0.1, 0.4, 0.3, 0.2
  const T64 label = image({0.0, 0.0, 0.0, 0.0}, 1, 4), pred = image({0.1, 0.4, 0.3, 0.2}, 1, 4);
  CHECK(nist::loss_shade(pred, label, 2).item() == doctest::Approx((0.4 + 0.3) / 2.0));
  CHECK(nist::loss_shade(pred, label, 1).item() == doctest::Approx(0.4));
  CHECK(nist::loss_shade(pred, label, 100).item() == doctest::Approx(0.25)); // clamped to N
  const T64 a = random_image(3, 5, 5, 5), b = random_image(3, 5, 5, 6);
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) l1 += std::abs(a.data()[i] - b.data()[i]);
  l1 /= static_cast<double>(a.numel());
  CHECK(std::abs(nist::loss_shade(a, b, 25).item() - l1) < 1e-12);
  CHECK(nist::loss_shade(b, b, 3).item() == 0.0);
  // ties go to the lower pixel index: the gradient lands on pixel 0 only
  T64 tied = T64::from({1, 1, 1, 3}, {0.5, 0.5, 0.5}, true);
  ad::backward(nist::loss_shade(tied, T64::zeros({1, 1, 1, 3}), 1));
  CHECK(tied.grad()[0] == 1.0);
  CHECK(tied.grad()[1] == 0.0);
}

TEST_CASE("gradient-domain perceptual substitute") {
  const T64 l = random_image(3, 8, 8, 7);
  CHECK(nist::loss_percep(l, l).item() == 0.0);
  std::vector<double> shifted(l.data().begin(), l.data().end());
  for (auto& v : shifted) v += 0.25;
  CHECK(nist::loss_percep(T64::from(l.shape(), shifted), l).item() == doctest::Approx(0.0).epsilon(1e-12));

  // step edge at column 3 (label) vs column 4 (pred) on a 4x8 single-channel image
  std::vector<double> lab(32), pre(32);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) {
      lab[y * 8 + x] = x >= 3 ? 1.0 : 0.0;
      pre[y * 8 + x] = x >= 4 ? 1.0 : 0.0;
    }
  // level 0: per row the x-gradients differ by 1 at columns 2->3 and 3->4, over 4*7 differences;
  // level 1 (2x4 means): label row (0, 0.5, 1, 1), pred (0, 0, 1, 1): |0.5| + |0.5| over 2*3 differences;
  // level 2 would need 1x2 and is skipped because dims drop below 4.
  const double expected = (4.0 * 2.0) / 28.0 + (2.0 * 1.0) / 6.0;
  CHECK(nist::loss_percep(image(pre, 4, 8), image(lab, 4, 8)).item() == doctest::Approx(expected));
}

TEST_CASE("total loss combines the weighted terms") {
  const T64 l = random_image(3, 8, 8, 8), in = random_image(3, 8, 8, 9);
  const auto zero = nist::total_loss(l, l, in, nist::LossConfig{});
  CHECK(zero.total.item() == 0.0);
  CHECK(zero.rr == 0.0);
  CHECK(zero.shade == 0.0);
  CHECK(zero.percep == 0.0);

  nist::LossConfig off;
  off.lambda_rr = off.lambda_shade = off.lambda_percep = 0.0;
  CHECK(nist::total_loss(random_image(3, 8, 8, 10), l, in, off).total.item() == 0.0);

  nist::LossConfig c;
  c.lambda_rr = 0.1;
  c.lambda_shade = 10.0;
  c.lambda_percep = 0.0;
  c.k_fraction = 0.5; // k = 1 of the 2 pixels
  c.epsilon = 1e-6;
  const auto two = nist::total_loss(image({0.5, 0.2}, 1, 2), image({0.4, 0.2}, 1, 2), image({0.0, 0.2}, 1, 2), c);
  CHECK(std::abs(two.total.item() - 1.0125) < 1e-6);

  const auto reference = nist::LossConfig::preset("reference");
  CHECK(reference.lambda_rr == 0.1);
  CHECK(reference.lambda_shade == 10.0);
  CHECK(reference.lambda_percep == 30.0);
  CHECK(reference.epsilon == 1e-6);
  CHECK(nist::LossConfig::preset("desk") == nist::LossConfig{});
  CHECK(nist::LossConfig::preset("desk").lambda_percep == 1.0);
  CHECK_THROWS(nist::LossConfig::preset("lpips"));
  const T64 p = random_image(3, 8, 8, 11);
  const auto b = nist::total_loss(p, l, in, reference);
  CHECK(b.total.item() == doctest::Approx(0.1 * b.rr + 10.0 * b.shade + 30.0 * b.percep).epsilon(1e-9));
}

TEST_CASE("Adam updates") {
  T64 p = T64::from({1}, {0.0}, true);
  nist::AdamConfig cfg;
  nist::Adam<double> adam({{"p", p}}, cfg);
  CHECK_THROWS_WITH(adam.step(), doctest::Contains("'p'"));
  p.mutable_grad()[0] = 1.0;
  adam.step();
  // bias-corrected first step: m_hat = 1, v_hat = 1, so the move is lr / (1 + eps)
  CHECK(p.data()[0] == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-12));

  T64 q = T64::from({2}, {0.3, -0.7}, true);
  nist::AdamConfig no_decay;
  no_decay.weight_decay = 0.0;
  nist::Adam<double> still({{"q", q}}, no_decay);
  q.mutable_grad();
  for (int i = 0; i < 5; ++i) still.step();
  CHECK(q.data()[0] == 0.3);
  CHECK(q.data()[1] == -0.7);

  // decoupled decay alone shrinks by lr * wd per step
  T64 r = T64::from({1}, {2.0}, true);
  nist::Adam<double> decay({{"r", r}}, cfg);
  r.mutable_grad();
  decay.step();
  CHECK(r.data()[0] == doctest::Approx(2.0 - 1e-4 * 1e-5 * 2.0).epsilon(1e-15));
}

TEST_CASE("ablation configs") {
  const nist::TrainConfig base;
  CHECK(nist::make_ablation(base, "full").model == base.model);
  CHECK(nist::make_ablation(base, "no_deform").model.variant == nist::Variant::no_deform);
  CHECK(nist::make_ablation(base, "no_warp").model.variant == nist::Variant::no_warp);
  const auto np = nist::make_ablation(base, "no_percep");
  CHECK(np.loss.lambda_percep == 0.0);
  CHECK(np.model == base.model);
  CHECK_THROWS(nist::make_ablation(base, "no_color"));
}

TEST_CASE("checkpoint round trip and config mismatch") {
  const fs::path dir = fs::temp_directory_path() / "nist_ckpt_test";
  fs::remove_all(dir);
  nist::ModelConfig c;
  c.guidance_channels = c.deform_channels = c.color_channels = 4;
  const nist::Network<float> net(c, 9);
  nist::save_checkpoint(dir / "a.ckpt", net);
  CHECK(slurp(dir / "a.ckpt").rfind("NIST", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));
  const nist::Network<float> back = nist::load_network(dir / "a.ckpt");
  CHECK(back.config() == c);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const auto& a = net.parameters()[i].second;
    const auto& b = back.parameters()[i].second;
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  }
  nist::ModelConfig other = c;
  other.scales = 2;
  nist::Network<float> wrong(other, 9);
  CHECK_THROWS_WITH(nist::load_checkpoint(dir / "a.ckpt", wrong), doctest::Contains("does not match"));
  std::ofstream(dir / "junk.ckpt") << "nope";
  CHECK_THROWS(nist::load_network(dir / "junk.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("config files and overrides") {
  const fs::path dir = fs::temp_directory_path() / "nist_cfg_test";
  fs::create_directories(dir);
  std::ofstream(dir / "ok.cfg") << "# comment\nsteps = 12\nres=64x32\nlambda_percep=30\nvariant=no_warp\n\n";
  nist::RunConfig c;
  nist::load_config_file(dir / "ok.cfg", c);
  CHECK(c.train.steps == 12);
  CHECK(c.width == 64);
  CHECK(c.height == 32);
  CHECK(c.train.loss.lambda_percep == 30.0);
  CHECK(c.train.model.variant == nist::Variant::no_warp);
  std::ofstream(dir / "bad.cfg") << "steps=3\nsteps_count=4\n";
  CHECK_THROWS_WITH(nist::load_config_file(dir / "bad.cfg", c), doctest::Contains("steps_count"));
  CHECK_THROWS_WITH(nist::load_config_file(dir / "bad.cfg", c), doctest::Contains(":2:"));
  CHECK_THROWS(nist::apply_setting(c, "lr", "fast"));
  CHECK_THROWS(nist::apply_setting(c, "scene", "teapot"));
  nist::apply_setting(c, "lr", "3e-4");
  CHECK(c.train.adam.lr == 3e-4);
  fs::remove_all(dir);
}

TEST_CASE("zero-step training writes the initialization") {
  const fs::path out = fs::temp_directory_path() / "nist_train_zero";
  fs::remove_all(out);
  nist::TrainConfig c = tiny_config();
  c.steps = 0;
  const auto data = nist::read_manifest(tiny_dataset() / "manifest.txt");
  const auto r = nist::train(data, c, out);
  CHECK(r.records.empty());
  const nist::Network<float> init(c.model, c.seed);
  const nist::Network<float> saved = nist::load_network(r.checkpoint);
  for (std::size_t i = 0; i < init.parameters().size(); ++i) {
    const auto& a = init.parameters()[i].second;
    const auto& b = saved.parameters()[i].second;
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  }
  CHECK(slurp(r.trace).empty());
  fs::remove_all(out);
}

TEST_CASE("training is deterministic and writes trace and checkpoints") {
  const fs::path a = fs::temp_directory_path() / "nist_train_a", b = fs::temp_directory_path() / "nist_train_b";
  fs::remove_all(a);
  fs::remove_all(b);
  nist::TrainConfig c = tiny_config();
  c.crop = 16; // exercises the silhouette-biased crop path on 48x48 frames
  const auto data = nist::read_manifest(tiny_dataset() / "manifest.txt");
  const auto ra = nist::train(data, c, a);
  const auto rb = nist::train(data, c, b);
  CHECK(ra.records.size() == 3);
  CHECK(slurp(ra.trace) == slurp(rb.trace));
  CHECK(slurp(ra.checkpoint) == slurp(rb.checkpoint));
  CHECK(fs::exists(a / "checkpoint_000002.ckpt"));
  std::ifstream trace(ra.trace);
  int step;
  double total, rr, shade, percep;
  trace >> step >> total >> rr >> shade >> percep;
  CHECK(step == 1);
  CHECK(total == doctest::Approx(c.loss.lambda_rr * rr + c.loss.lambda_shade * shade + c.loss.lambda_percep * percep).epsilon(1e-5));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("non-finite loss aborts with the step index") {
  const fs::path data_dir = fs::temp_directory_path() / "nist_train_nan";
  fs::remove_all(data_dir);
  const auto m = nist::generate_dataset(nist::SceneSpec{}, 2, 3, {2, 0.75}, data_dir, 32, 32);
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    auto img = nist::pfm::read(m.frame_dir(i) / "label.pfm");
    img.data[5] = NAN;
    nist::pfm::write(m.frame_dir(i) / "label.pfm", img);
  }
  nist::TrainConfig c = tiny_config();
  CHECK_THROWS_WITH(nist::train(m, c, data_dir / "run"), doctest::Contains("step 1"));
  fs::remove_all(data_dir);
}

TEST_CASE("crop selection stays inside the frame and favors silhouettes") {
  std::mt19937_64 rng(4);
  const std::vector<std::uint32_t> sil = {static_cast<std::uint32_t>(60 * 100 + 70)};
  int centered = 0;
  for (int i = 0; i < 200; ++i) {
    const nist::Crop c = nist::choose_crop(100, 80, 32, 32, sil, 0.8, rng);
    CHECK(c.x >= 0);
    CHECK(c.y >= 0);
    CHECK(c.x + 32 <= 100);
    CHECK(c.y + 32 <= 80);
    centered += c.x == 54 && c.y == 44;
  }
  CHECK(centered > 120);
  CHECK(centered < 190);
  const nist::Crop full = nist::choose_crop(32, 32, 32, 32, sil, 0.8, rng);
  CHECK(full.x == 0);
  CHECK(full.y == 0);
}
