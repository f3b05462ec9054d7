// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace nist {

using ad::Tensor;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t conv_params(int in, int out, int k) {
  return static_cast<std::size_t>(out) * in * k * k + static_cast<std::size_t>(out);
}

std::size_t double_params(int in, int mid, int out, int k1) {
  return conv_params(in, mid, k1) + conv_params(mid, out, 3);
}

std::string scale_prefix(int t) { return "s" + std::to_string(t) + "."; }

} // namespace

std::string variant_name(Variant v) {
  switch (v) {
  case Variant::full: return "full";
  case Variant::no_deform: return "no_deform";
  case Variant::no_warp: return "no_warp";
  }
  return "full";
}

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no_deform") return Variant::no_deform;
  if (name == "no_warp") return Variant::no_warp;
  throw std::invalid_argument("unknown model variant '" + name + "'");
}

void ModelConfig::validate() const {
  if (scales < 1) throw std::invalid_argument("model scales must be >= 1");
  if (working_levels < 0) throw std::invalid_argument("working_levels must be >= 0");
  if (guidance_channels < 1 || deform_channels < 1 || color_channels < 1) {
    throw std::invalid_argument("channel counts must be positive");
  }
  if (!(flow_scale > 0.0 && flow_scale <= 1.0)) {
    throw std::invalid_argument("flow_scale must lie in (0, 1]");
  }
  if (!(leaky_slope >= 0.0)) throw std::invalid_argument("leaky_slope must be >= 0");
}

void ModelConfig::validate_input(int height, int width) const {
  const int factor = 1 << (working_levels + scales - 1);
  if (height <= 0 || width <= 0 || height % factor != 0 || width % factor != 0) {
    throw std::invalid_argument(
        "input " + std::to_string(width) + "x" + std::to_string(height) +
        " violates the working-resolution divisibility constraint: the working resolution "
        "(input / " + std::to_string(1 << working_levels) + ") must be divisible by 2^(scales-1) = " +
        std::to_string(1 << (scales - 1)) + ", so input dims must be multiples of " +
        std::to_string(factor));
  }
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const int cg = c.guidance_channels, cd = c.deform_channels, cc = c.color_channels;
  std::size_t n = double_params(3, cc, cc, 3);                   // full-res color
  n += double_params(cc, cc, cc, 3) * c.scales;                  // color pyramid
  n += double_params(8, cg, cg, 3) + double_params(cg, cg, cg, 3) * (c.scales - 1);
  for (int t = 1; t <= c.scales; ++t) {
    if (c.variant == Variant::no_deform) {
      n += double_params(cg, cd, cd, 3);
    } else {
      const int kin = t == 1 ? cg : cd;
      n += double_params(cg, cd, cd, 3) + 2 * double_params(kin, cd, cd, 3) +
           double_params(2 * cd, cd, cd, 3) + double_params(cd, cd, cd, 7);
    }
    if (c.variant != Variant::no_warp) n += double_params(cd, cd, 2, 3);
    n += double_params(2 * cc, cc, cc, 3);
  }
  n += double_params(2 * cc + cd, cc, cc, 3) + conv_params(cc, 3, 3);
  return n;
}

template <typename T>
NetworkInput<T> make_input(const std::vector<const GBufferFrame*>& frames, const std::vector<Crop>& crops) {
  if (frames.empty()) throw std::invalid_argument("make_input: empty batch");
  if (!crops.empty() && crops.size() != frames.size()) {
    throw std::invalid_argument("make_input: one crop per frame required");
  }
  const int fw = frames[0]->width, fh = frames[0]->height;
  const int w = crops.empty() || crops[0].width == 0 ? fw : crops[0].width;
  const int h = crops.empty() || crops[0].height == 0 ? fh : crops[0].height;
  const int B = static_cast<int>(frames.size());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<T> color(static_cast<std::size_t>(B) * 3 * hw), guide(static_cast<std::size_t>(B) * 8 * hw);
  for (int b = 0; b < B; ++b) {
    const GBufferFrame& f = *frames[b];
    f.validate();
    const Crop crop = crops.empty() ? Crop{0, 0, w, h} : Crop{crops[b].x, crops[b].y, w, h};
    if (f.width != fw || f.height != fh || crop.x < 0 || crop.y < 0 || crop.x + w > f.width ||
        crop.y + h > f.height) {
      throw std::invalid_argument("make_input: frame " + std::to_string(b) + " does not fit the batch crop");
    }
    T* c = color.data() + static_cast<std::size_t>(b) * 3 * hw;
    T* g = guide.data() + static_cast<std::size_t>(b) * 8 * hw;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t src = static_cast<std::size_t>(y + crop.y) * f.width + (x + crop.x);
        const std::size_t dst = static_cast<std::size_t>(y) * w + x;
        for (int ch = 0; ch < 3; ++ch) {
          c[ch * hw + dst] = static_cast<T>(f.color[3 * src + ch]);
          g[ch * hw + dst] = static_cast<T>(f.gnormal[3 * src + ch]);
          g[(3 + ch) * hw + dst] = static_cast<T>(f.snormal[3 * src + ch]);
        }
        g[6 * hw + dst] = static_cast<T>(f.depth[src]);
        g[7 * hw + dst] = static_cast<T>(f.coverage[src]);
      }
    }
  }
  return {Tensor<T>::from({B, 3, h, w}, std::move(color)), Tensor<T>::from({B, 8, h, w}, std::move(guide))};
}

template <typename T>
Tensor<T> color_tensor(const std::vector<const GBufferFrame*>& frames, bool label, const std::vector<Crop>& crops) {
  if (frames.empty()) throw std::invalid_argument("color_tensor: empty batch");
  const int fw = frames[0]->width, fh = frames[0]->height;
  const int w = crops.empty() || crops[0].width == 0 ? fw : crops[0].width;
  const int h = crops.empty() || crops[0].height == 0 ? fh : crops[0].height;
  const int B = static_cast<int>(frames.size());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<T> out(static_cast<std::size_t>(B) * 3 * hw);
  for (int b = 0; b < B; ++b) {
    const GBufferFrame& f = *frames[b];
    const auto& src_plane = label ? f.label : f.color;
    const int ox = crops.empty() ? 0 : crops[b].x, oy = crops.empty() ? 0 : crops[b].y;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t src = static_cast<std::size_t>(y + oy) * f.width + (x + ox);
        for (int ch = 0; ch < 3; ++ch)
          out[(static_cast<std::size_t>(b) * 3 + ch) * hw + static_cast<std::size_t>(y) * w + x] =
              static_cast<T>(src_plane[3 * src + ch]);
      }
  }
  return Tensor<T>::from({B, 3, h, w}, std::move(out));
}

template <typename T>
Network<T>::Network(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  const int cg = config_.guidance_channels, cd = config_.deform_channels, cc = config_.color_channels;
  color_full_ = make_double("color.full", 3, cc, cc, 3);
  for (int t = 1; t <= config_.scales; ++t) {
    const std::string p = scale_prefix(t);
    color_enc_.push_back(make_double("color." + p + "enc", cc, cc, cc, 3));
    guidance_enc_.push_back(make_double("guide." + p + "enc", t == config_.scales ? 8 : cg, cg, cg, 3));
    ScaleBlocks blocks;
    if (config_.variant == Variant::no_deform) {
      blocks.plain = make_double(p + "deform_plain", cg, cd, cd, 3);
    } else {
      const int kin = t == 1 ? cg : cd;
      blocks.query = make_double(p + "query", cg, cd, cd, 3);
      blocks.key = make_double(p + "key", kin, cd, cd, 3);
      blocks.value = make_double(p + "value", kin, cd, cd, 3);
      blocks.attend = make_double(p + "attend", 2 * cd, cd, cd, 3);
      blocks.deform = make_double(p + "deform", cd, cd, cd, 7);
    }
    if (config_.variant != Variant::no_warp) {
      blocks.flow = make_double(p + "flow", cd, cd, 2, 3, /*zero_second=*/true);
    }
    blocks.color = make_double(p + "color_refine", 2 * cc, cc, cc, 3);
    scales_.push_back(std::move(blocks));
  }
  decoder_ = make_double("decoder", 2 * cc + cd, cc, cc, 3);
  {
    // the head is a lone conv; reuse the double-conv initializer's naming scheme
    DoubleConv<T> tmp = make_double("head", cc, 3, 3, 3);
    head_ = tmp.first;
    // drop the unused second half
    for (const char* suffix : {"head.b.weight", "head.b.bias"}) {
      const auto it = std::find_if(params_.begin(), params_.end(),
                                   [&](const auto& p) { return p.first == suffix; });
      params_.erase(it);
    }
  }
  std::sort(params_.begin(), params_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < params_.size(); ++i) index_[params_[i].first] = i;
}

template <typename T>
DoubleConv<T> Network<T>::make_double(const std::string& name, int in, int mid, int out, int first_kernel,
                                      bool zero_second) {
  auto make_conv = [&](const std::string& cname, int cin, int cout, int k, bool zero) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(fnv1a(cname)), static_cast<std::uint32_t>(fnv1a(cname) >> 32)};
    std::mt19937_64 rng(seq);
    const std::size_t n = static_cast<std::size_t>(cout) * cin * k * k;
    std::vector<T> w(n, T(0));
    if (!zero) {
      const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
      // Box-Muller on raw 53-bit draws keeps the stream identical across standard libraries.
      auto uni = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
      for (std::size_t i = 0; i < n; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uni()));
        const double a = 2.0 * std::numbers::pi * uni();
        w[i] = static_cast<T>(stddev * r * std::cos(a));
        if (i + 1 < n) w[i + 1] = static_cast<T>(stddev * r * std::sin(a));
      }
    }
    Conv<T> conv{Tensor<T>::from({cout, cin, k, k}, std::move(w), true),
                 Tensor<T>::zeros({cout}, true)};
    params_.emplace_back(cname + ".weight", conv.weight);
    params_.emplace_back(cname + ".bias", conv.bias);
    return conv;
  };
  return {make_conv(name + ".a", in, mid, first_kernel, false),
          make_conv(name + ".b", mid, out, 3, zero_second)};
}

template <typename T> ad::Tensor<T>& Network<T>::parameter(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return params_[it->second].second;
}

template <typename T> std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.numel();
  return n;
}

template <typename T> void Network<T>::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

template <typename T> void Network<T>::assign(const std::string& name, std::vector<T> values) {
  Tensor<T>& p = parameter(name);
  if (values.size() != p.numel()) {
    throw std::invalid_argument("parameter '" + name + "' expects " + std::to_string(p.numel()) +
                                " values, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), p.mutable_data().begin());
}

template <typename T> Tensor<T> Network<T>::run(const DoubleConv<T>& block, const Tensor<T>& x) const {
  const T slope = static_cast<T>(config_.leaky_slope);
  Tensor<T> h = ad::conv2d(x, block.first.weight, block.first.bias);
  h = ad::leaky_relu(h, slope);
  return ad::conv2d(h, block.second.weight, block.second.bias);
}

template <typename T> std::vector<Tensor<T>> Network<T>::encode_guidance(const Tensor<T>& guidance) const {
  if (guidance.shape().size() != 4 || guidance.dim(1) != 8) {
    throw ad::ShapeError("encode_guidance expects B x 8 x H x W, got " + ad::to_string(guidance.shape()));
  }
  config_.validate_input(guidance.dim(2), guidance.dim(3));
  Tensor<T> x = guidance;
  for (int l = 0; l < config_.working_levels; ++l) x = ad::downsample2(x);
  std::vector<Tensor<T>> pyramid(config_.scales);
  for (int t = config_.scales; t >= 1; --t) {
    if (t < config_.scales) x = ad::downsample2(pyramid[t]);
    pyramid[t - 1] = run(guidance_enc_[t - 1], x);
  }
  return pyramid;
}

template <typename T> Tensor<T> Network<T>::encode_full_res_color(const Tensor<T>& color) const {
  if (color.shape().size() != 4 || color.dim(1) != 3) {
    throw ad::ShapeError("color encoder expects B x 3 x H x W, got " + ad::to_string(color.shape()));
  }
  config_.validate_input(color.dim(2), color.dim(3));
  return run(color_full_, color);
}

template <typename T> std::vector<Tensor<T>> Network<T>::encode_color(const Tensor<T>& full_res) const {
  Tensor<T> x = full_res;
  for (int l = 0; l < config_.working_levels; ++l) x = ad::downsample2(x);
  std::vector<Tensor<T>> pyramid(config_.scales);
  for (int t = config_.scales; t >= 1; --t) {
    if (t < config_.scales) x = ad::downsample2(pyramid[t]);
    pyramid[t - 1] = run(color_enc_[t - 1], x);
  }
  return pyramid;
}

template <typename T>
DeformationOutput<T> Network<T>::deformation_step(int t, const Tensor<T>& guidance, const Tensor<T>& z_prev) const {
  if (t < 1 || t > config_.scales) throw std::out_of_range("scale index " + std::to_string(t) + " out of range");
  if (guidance.dim(2) != z_prev.dim(2) || guidance.dim(3) != z_prev.dim(3)) {
    throw ad::ShapeError("deformation_step at scale " + std::to_string(t) + ": guidance " +
                         ad::to_string(guidance.shape()) + " and previous state " +
                         ad::to_string(z_prev.shape()) + " differ in resolution");
  }
  const ScaleBlocks& blocks = scales_[t - 1];
  if (config_.variant == Variant::no_deform) return {run(blocks.plain, guidance), {}};
  const Tensor<T> q = run(blocks.query, guidance);
  const Tensor<T> k = run(blocks.key, z_prev);
  const Tensor<T> v = run(blocks.value, z_prev);
  const Tensor<T> attention = ad::softmax(run(blocks.attend, ad::concat<T>({q, k}, 1)), 1);
  const Tensor<T> attended = ad::mul(attention, v);
  return {run(blocks.deform, attended), attention};
}

template <typename T>
WarpOutput<T> Network<T>::warp_step(int t, const Tensor<T>& deform_state, const Tensor<T>& guidance,
                                    const Tensor<T>& color_state_prev, const Tensor<T>& encoder_color,
                                    const Tensor<T>& cumulative_prev) const {
  if (t < 1 || t > config_.scales) throw std::out_of_range("scale index " + std::to_string(t) + " out of range");
  const int B = deform_state.dim(0), H = deform_state.dim(2), W = deform_state.dim(3);
  for (const Tensor<T>* x : {&guidance, &color_state_prev, &encoder_color, &cumulative_prev}) {
    if (x->defined() && (x->dim(2) != H || x->dim(3) != W)) {
      throw ad::ShapeError("warp_step at scale " + std::to_string(t) + ": " + ad::to_string(x->shape()) +
                           " does not match the deformation state " + ad::to_string(deform_state.shape()));
    }
  }
  const ScaleBlocks& blocks = scales_[t - 1];
  WarpOutput<T> out;
  if (config_.variant == Variant::no_warp) {
    out.flow = Tensor<T>::zeros({B, 2, H, W});
    out.cumulative = Tensor<T>::zeros({B, 2, H, W});
    out.guidance = guidance;
    out.color = run(blocks.color, ad::concat<T>({color_state_prev, encoder_color}, 1));
    return out;
  }
  out.flow = ad::scale(ad::tanh(run(blocks.flow, deform_state)), static_cast<T>(config_.flow_scale));
  if (!cumulative_prev.defined()) {
    out.cumulative = out.flow;
  } else if (config_.compose_flow) {
    out.cumulative = ad::add(out.flow, ad::grid_sample_bilinear(cumulative_prev, out.flow));
  } else {
    out.cumulative = ad::add(out.flow, cumulative_prev);
  }
  out.guidance = ad::grid_sample_bilinear(guidance, out.flow);
  const Tensor<T> warped_prev = ad::grid_sample_bilinear(color_state_prev, out.flow);
  const Tensor<T> warped_enc = ad::grid_sample_bilinear(encoder_color, out.cumulative);
  out.color = run(blocks.color, ad::concat<T>({warped_prev, warped_enc}, 1));
  return out;
}

template <typename T> ForwardResult<T> Network<T>::forward(const NetworkInput<T>& input) const {
  const int H = input.color.dim(2), W = input.color.dim(3);
  if (input.guidance.dim(2) != H || input.guidance.dim(3) != W || input.guidance.dim(0) != input.color.dim(0)) {
    throw ad::ShapeError("color " + ad::to_string(input.color.shape()) + " and guidance " +
                         ad::to_string(input.guidance.shape()) + " are not aligned");
  }
  config_.validate_input(H, W);
  ForwardResult<T> r;
  r.guidance_pyramid = encode_guidance(input.guidance);
  const Tensor<T> color_full = encode_full_res_color(input.color);
  const std::vector<Tensor<T>> color_pyramid = encode_color(color_full);

  Tensor<T> guidance_in = r.guidance_pyramid[0];
  Tensor<T> color_state = color_pyramid[0];
  Tensor<T> z_prev = guidance_in;
  Tensor<T> cumulative;
  Tensor<T> deform_state;
  for (int t = 1; t <= config_.scales; ++t) {
    if (t > 1) {
      // carry state to the finer level; flows are normalized so values transfer as-is
      const Tensor<T> cum_up = ad::upsample2(cumulative);
      const Tensor<T> aligned = config_.variant == Variant::no_warp
                                    ? r.guidance_pyramid[t - 1]
                                    : ad::grid_sample_bilinear(r.guidance_pyramid[t - 1], cum_up);
      guidance_in = ad::add(ad::upsample2(r.warped_guidance.back()), aligned);
      color_state = ad::upsample2(color_state);
      z_prev = ad::upsample2(deform_state);
      cumulative = cum_up;
    }
    DeformationOutput<T> d = deformation_step(t, guidance_in, z_prev);
    deform_state = d.state;
    WarpOutput<T> w = warp_step(t, deform_state, guidance_in, color_state, color_pyramid[t - 1], cumulative);
    cumulative = w.cumulative;
    color_state = w.color;
    r.deform_states.push_back(d.state);
    r.attention.push_back(d.attention);
    r.flows.push_back(w.flow);
    r.cumulative_flows.push_back(w.cumulative);
    r.warped_guidance.push_back(w.guidance);
  }

  Tensor<T> flow_full = cumulative;
  Tensor<T> deform_full = deform_state;
  Tensor<T> color_state_full = color_state;
  for (int l = 0; l < config_.working_levels; ++l) {
    flow_full = ad::upsample2(flow_full);
    deform_full = ad::upsample2(deform_full);
    color_state_full = ad::upsample2(color_state_full);
  }
  r.full_res_flow = flow_full;
  const Tensor<T> warped_full =
      config_.variant == Variant::no_warp ? color_full : ad::grid_sample_bilinear(color_full, flow_full);
  const Tensor<T> h = run(decoder_, ad::concat<T>({warped_full, deform_full, color_state_full}, 1));
  const Tensor<T> act = ad::leaky_relu(h, static_cast<T>(config_.leaky_slope));
  r.raw = ad::conv2d(act, head_.weight, head_.bias);
  r.image = ad::clamp(r.raw, T(0), T(1));
  return r;
}

template class Network<float>;
template class Network<double>;
template NetworkInput<float> make_input(const std::vector<const GBufferFrame*>&, const std::vector<Crop>&);
template NetworkInput<double> make_input(const std::vector<const GBufferFrame*>&, const std::vector<Crop>&);
template Tensor<float> color_tensor(const std::vector<const GBufferFrame*>&, bool, const std::vector<Crop>&);
template Tensor<double> color_tensor(const std::vector<const GBufferFrame*>&, bool, const std::vector<Crop>&);

} // namespace nist
