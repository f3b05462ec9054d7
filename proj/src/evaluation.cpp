// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace nist {

std::vector<std::uint8_t> silhouette_mask(const RasterOutput& frame, const SilhouetteConfig& config) {
  const int W = frame.width, H = frame.height;
  const double cos_limit = std::cos(config.angle_degrees * std::numbers::pi / 180.0);
  std::vector<std::uint8_t> edge(frame.pixels(), 0);
  auto covered = [&](int x, int y) { return frame.coverage[static_cast<std::size_t>(y) * W + x] > 0.5f; };
  auto crease = [&](std::size_t a, std::size_t b) {
    double dot = 0.0;
    for (int c = 0; c < 3; ++c) dot += static_cast<double>(frame.gnormal[3 * a + c]) * frame.gnormal[3 * b + c];
    return dot < cos_limit;
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const int nx[2] = {x + 1, x}, ny[2] = {y, y + 1};
      for (int k = 0; k < 2; ++k) {
        if (nx[k] >= W || ny[k] >= H) continue;
        const std::size_t j = static_cast<std::size_t>(ny[k]) * W + nx[k];
        const bool ci = covered(x, y), cj = covered(nx[k], ny[k]);
        if (ci != cj || (ci && cj && crease(i, j))) edge[i] = edge[j] = 1;
      }
    }
  // separable square dilation
  const int r = config.radius;
  std::vector<std::uint8_t> rows(edge.size(), 0), out(edge.size(), 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!edge[static_cast<std::size_t>(y) * W + x]) continue;
      for (int dx = std::max(0, x - r); dx <= std::min(W - 1, x + r); ++dx) rows[static_cast<std::size_t>(y) * W + dx] = 1;
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!rows[static_cast<std::size_t>(y) * W + x]) continue;
      for (int dy = std::max(0, y - r); dy <= std::min(H - 1, y + r); ++dy) out[static_cast<std::size_t>(dy) * W + x] = 1;
    }
  return out;
}

double psnr(std::span<const float> a, std::span<const float> b, int channels,
            std::optional<std::span<const std::uint8_t>> mask) {
  if (a.size() != b.size() || channels <= 0 || a.size() % channels != 0) {
    throw std::invalid_argument("psnr: image sizes differ");
  }
  const std::size_t pixels = a.size() / channels;
  if (mask && mask->size() != pixels) throw std::invalid_argument("psnr: mask size differs from image");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (mask && !(*mask)[p]) continue;
    for (int c = 0; c < channels; ++c) {
      const double d = static_cast<double>(a[p * channels + c]) - b[p * channels + c];
      sum += d * d;
    }
    count += channels;
  }
  if (count == 0) throw std::invalid_argument("psnr: empty mask");
  const double mse = sum / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double masked_l1(std::span<const float> a, std::span<const float> b, int channels,
                 std::span<const std::uint8_t> mask) {
  if (a.size() != b.size() || a.size() != mask.size() * channels) {
    throw std::invalid_argument("masked_l1: size mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < channels; ++c) sum += std::abs(static_cast<double>(a[p * channels + c]) - b[p * channels + c]);
    count += channels;
  }
  if (count == 0) throw std::invalid_argument("masked_l1: empty mask");
  return sum / static_cast<double>(count);
}

FrameMetrics frame_metrics(const GBufferFrame& frame, std::span<const float> prediction,
                           const SilhouetteConfig& config) {
  const auto mask = silhouette_mask(frame, config);
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    throw std::runtime_error("frame has no silhouette pixels; masked metrics are undefined");
  }
  FrameMetrics m;
  const std::span<const std::uint8_t> ms(mask);
  m.psnr_full = psnr(prediction, frame.label, 3);
  m.psnr_sil = psnr(prediction, frame.label, 3, ms);
  m.l1_sil = masked_l1(prediction, frame.label, 3, ms);
  m.baseline_l1_sil = masked_l1(frame.color, frame.label, 3, ms);
  m.ratio = m.baseline_l1_sil > 0.0 ? m.l1_sil / m.baseline_l1_sil : (m.l1_sil > 0.0 ? INFINITY : 0.0);
  return m;
}

std::string manifest_id(const Manifest& manifest) {
  std::ostringstream id;
  id << std::filesystem::weakly_canonical(manifest.root).string() << "|seed=" << manifest.seed
     << "|count=" << manifest.frames.size() << "|res=" << manifest.width << "x" << manifest.height;
  return id.str();
}

EvalReport evaluate(const Network<float>* net, const Manifest& manifest, const EvalOptions& options,
                    const std::string& name) {
  if (manifest.frames.empty()) throw std::runtime_error("evaluate: test manifest has no frames");
  if (!net && !options.oracle_label) throw std::invalid_argument("evaluate: no model and oracle mode disabled");
  if (net) net->config().validate_input(manifest.height, manifest.width);
  EvalReport report;
  report.name = name;
  report.manifest_id = manifest_id(manifest);
  ad::NoGradGuard no_grad;
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    const GBufferFrame frame = read_frame(manifest.frame_dir(i));
    std::vector<float> prediction;
    if (options.oracle_label) {
      prediction = frame.label;
    } else {
      const ForwardResult<float> r = net->forward(make_input<float>({&frame}));
      const auto img = r.image.data();
      const std::size_t hw = frame.pixels();
      prediction.resize(3 * hw);
      for (std::size_t p = 0; p < hw; ++p)
        for (int c = 0; c < 3; ++c) prediction[3 * p + c] = img[c * hw + p];
      for (const auto& v : r.flows)
        for (float f : v.data()) report.max_abs_flow = std::max(report.max_abs_flow, std::abs(static_cast<double>(f)));
    }
    FrameMetrics m;
    try {
      m = frame_metrics(frame, prediction, options.silhouette);
    } catch (const std::exception& e) {
      throw std::runtime_error(manifest.frame_dir(i).string() + ": " + e.what());
    }
    m.frame = manifest.frames[i];
    report.frames.push_back(m);
  }
  FrameMetrics& a = report.aggregate;
  a.frame = "mean";
  for (const auto& m : report.frames) {
    a.psnr_full += m.psnr_full;
    a.psnr_sil += m.psnr_sil;
    a.l1_sil += m.l1_sil;
    a.baseline_l1_sil += m.baseline_l1_sil;
    a.ratio += m.ratio;
  }
  const double n = static_cast<double>(report.frames.size());
  a.psnr_full /= n;
  a.psnr_sil /= n;
  a.l1_sil /= n;
  a.baseline_l1_sil /= n;
  a.ratio /= n;
  return report;
}

namespace {

std::string csv_row(const FrameMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", m.frame.c_str(), m.psnr_full, m.psnr_sil, m.l1_sil,
                m.baseline_l1_sil, m.ratio);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

} // namespace

void write_report(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  std::string csv = "frame,psnr_full,psnr_sil,l1_sil,baseline_l1_sil,ratio\n";
  for (const auto& m : report.frames) csv += csv_row(m);
  csv += csv_row(report.aggregate);
  write_text(dir / "report.csv", csv);

  std::ostringstream txt;
  char buf[256];
  txt << "model: " << report.name << "\nframes: " << report.frames.size() << "\n";
  std::snprintf(buf, sizeof buf,
                "psnr full      %8.3f dB\npsnr silhouette %7.3f dB\nl1 silhouette  %8.5f\n"
                "baseline l1    %8.5f\nratio          %8.5f\nmax |flow|     %8.5f\n",
                report.aggregate.psnr_full, report.aggregate.psnr_sil, report.aggregate.l1_sil,
                report.aggregate.baseline_l1_sil, report.aggregate.ratio, report.max_abs_flow);
  txt << buf;
  write_text(dir / "report.txt", txt.str());
}

AblationTable compare_ablations(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare_ablations needs at least two reports");
  for (const auto& r : reports) {
    if (r.manifest_id != reports[0].manifest_id) {
      throw std::invalid_argument("reports '" + reports[0].name + "' and '" + r.name +
                                  "' were computed on different test manifests");
    }
  }
  AblationTable table;
  for (const auto& r : reports) {
    FrameMetrics row = r.aggregate;
    row.frame = r.name;
    table.ranked.push_back(row);
  }
  std::stable_sort(table.ranked.begin(), table.ranked.end(), [](const FrameMetrics& a, const FrameMetrics& b) {
    return a.l1_sil != b.l1_sil ? a.l1_sil < b.l1_sil : a.frame < b.frame;
  });
  std::size_t width = 4;
  for (const auto& r : table.ranked) width = std::max(width, r.frame.size());
  std::ostringstream text;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s  %-*s  %10s  %10s  %10s  %8s\n", "rank", static_cast<int>(width), "name",
                "l1_sil", "psnr_sil", "psnr_full", "ratio");
  text << buf;
  table.csv = "rank,name,l1_sil,psnr_sil,psnr_full,ratio\n";
  for (std::size_t i = 0; i < table.ranked.size(); ++i) {
    const auto& r = table.ranked[i];
    std::snprintf(buf, sizeof buf, "%-4zu  %-*s  %10.6f  %10.4f  %10.4f  %8.5f\n", i + 1, static_cast<int>(width),
                  r.frame.c_str(), r.l1_sil, r.psnr_sil, r.psnr_full, r.ratio);
    text << buf;
    std::snprintf(buf, sizeof buf, "%zu,%s,%.9g,%.9g,%.9g,%.9g\n", i + 1, r.frame.c_str(), r.l1_sil, r.psnr_sil,
                  r.psnr_full, r.ratio);
    table.csv += buf;
  }
  table.text = text.str();
  return table;
}

} // namespace nist
