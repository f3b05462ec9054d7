// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "nist/checkpoint.hpp"

namespace nist {

namespace {

// Draws without the implementation-defined std::uniform_*_distribution so
// runs match across standard libraries.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }
double draw_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string checkpoint_name(int step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%06d.ckpt", step);
  return buf;
}

} // namespace

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  adam.validate();
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (crop < 1) throw std::invalid_argument("crop must be >= 1");
  if (!(silhouette_bias >= 0.0 && silhouette_bias <= 1.0)) {
    throw std::invalid_argument("silhouette_bias must lie in [0, 1]");
  }
  if (checkpoint_interval < 0) throw std::invalid_argument("checkpoint_interval must be >= 0");
}

TrainConfig make_ablation(const TrainConfig& base, const std::string& variant) {
  TrainConfig c = base;
  if (variant == "full") return c;
  if (variant == "no_deform") {
    c.model.variant = Variant::no_deform;
  } else if (variant == "no_warp") {
    c.model.variant = Variant::no_warp;
  } else if (variant == "no_percep") {
    c.loss.lambda_percep = 0.0;
  } else {
    throw std::invalid_argument("unknown ablation '" + variant + "' (expected full, no_deform, no_warp, no_percep)");
  }
  return c;
}

Crop choose_crop(int width, int height, int crop_w, int crop_h, const std::vector<std::uint32_t>& silhouette_pixels,
                 double silhouette_bias, std::mt19937_64& rng) {
  Crop c{0, 0, crop_w, crop_h};
  if (crop_w >= width && crop_h >= height) return c;
  const int max_x = width - crop_w, max_y = height - crop_h;
  if (!silhouette_pixels.empty() && draw_unit(rng) < silhouette_bias) {
    const std::uint32_t p = silhouette_pixels[draw_below(rng, silhouette_pixels.size())];
    const int px = static_cast<int>(p % static_cast<std::uint32_t>(width));
    const int py = static_cast<int>(p / static_cast<std::uint32_t>(width));
    c.x = std::clamp(px - crop_w / 2, 0, max_x);
    c.y = std::clamp(py - crop_h / 2, 0, max_y);
  } else {
    c.x = static_cast<int>(draw_below(rng, static_cast<std::uint64_t>(max_x) + 1));
    c.y = static_cast<int>(draw_below(rng, static_cast<std::uint64_t>(max_y) + 1));
  }
  return c;
}

TrainResult train(const Manifest& data, const TrainConfig& config, const std::filesystem::path& out_dir,
                  const std::function<void(const StepRecord&)>& progress) {
  config.validate();
  if (config.steps > 0 && data.frames.empty()) throw std::runtime_error("training manifest has no frames");
  std::filesystem::create_directories(out_dir);

  std::vector<GBufferFrame> frames;
  std::vector<std::vector<std::uint32_t>> silhouettes;
  for (std::size_t i = 0; i < data.frames.size() && config.steps > 0; ++i) {
    frames.push_back(read_frame(data.frame_dir(i)));
    const auto mask = silhouette_mask(frames.back(), config.silhouette);
    std::vector<std::uint32_t> pixels;
    for (std::uint32_t p = 0; p < mask.size(); ++p)
      if (mask[p]) pixels.push_back(p);
    silhouettes.push_back(std::move(pixels));
  }

  // crops shrink to the largest size the network accepts
  const int factor = 1 << (config.model.working_levels + config.model.scales - 1);
  const int crop_w = std::min(config.crop, data.width) / factor * factor;
  const int crop_h = std::min(config.crop, data.height) / factor * factor;
  if (config.steps > 0 && (crop_w == 0 || crop_h == 0)) config.model.validate_input(data.height, data.width);

  Network<float> net(config.model, config.seed);
  Adam<float> adam(net.parameters(), config.adam);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 0x5A3Du};
  std::mt19937_64 rng(seq);

  TrainResult result;
  result.trace = out_dir / "trace.txt";
  result.checkpoint = out_dir / "final.ckpt";
  std::ofstream trace(result.trace, std::ios::trunc);
  if (!trace) throw std::runtime_error("cannot write " + result.trace.string());

  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto next_frame = [&]() {
    if (cursor == order.size()) {
      order.resize(frames.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[draw_below(rng, i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  for (int step = 1; step <= config.steps; ++step) {
    std::vector<const GBufferFrame*> batch;
    std::vector<Crop> crops;
    for (int b = 0; b < config.batch_size; ++b) {
      const std::size_t f = next_frame();
      batch.push_back(&frames[f]);
      crops.push_back(choose_crop(data.width, data.height, crop_w, crop_h, silhouettes[f], config.silhouette_bias, rng));
    }
    const NetworkInput<float> input = make_input<float>(batch, crops);
    const ad::Tensor<float> label = color_tensor<float>(batch, true, crops);

    net.zero_grad();
    const ForwardResult<float> out = net.forward(input);
    // the loss sees the unclamped decoder output so saturated pixels still get gradient
    const LossBreakdown<float> loss = total_loss(out.raw, label, input.color, config.loss);
    StepRecord rec{step, static_cast<double>(loss.total.item()), loss.rr, loss.shade, loss.percep};
    if (!std::isfinite(rec.total)) {
      throw std::runtime_error("non-finite loss at step " + std::to_string(step));
    }
    ad::backward(loss.total);
    adam.step();

    char line[160];
    std::snprintf(line, sizeof line, "%d %.9g %.9g %.9g %.9g\n", rec.step, rec.total, rec.rr, rec.shade, rec.percep);
    trace << line;
    result.records.push_back(rec);
    if (progress) progress(rec);
    if (config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0 && step != config.steps) {
      trace.flush();
      save_checkpoint(out_dir / checkpoint_name(step), net);
    }
  }
  trace.flush();
  if (!trace) throw std::runtime_error("failed writing " + result.trace.string());
  save_checkpoint(result.checkpoint, net);
  return result;
}

} // namespace nist
