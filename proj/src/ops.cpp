// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "nist/tensor.hpp"

namespace nist::ad {
namespace {

template <typename T> using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T> using RowMap = Eigen::Map<RowMat<T>>;
template <typename T> using ConstRowMap = Eigen::Map<const RowMat<T>>;

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) {
    throw ShapeError(std::string(op) + ": expected a 4-D tensor, got " + to_string(s));
  }
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <typename T> bool wants_grad(const Node<T>& n, std::size_t i) {
  return n.parents.size() > i && n.parents[i] && n.parents[i]->requires_grad;
}

// Row r = (ci, ky, kx) of the patch matrix holds the input shifted by
// (ky - pad, kx - pad), zero outside the image.
template <typename T>
void im2col(const T* img, int channels, int height, int width, int k, T* col) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    const T* src = img + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dx = kx - pad, dy = ky - pad;
        const int x_lo = std::max(0, -dx), x_hi = std::min(width, width - dx);
        for (int y = 0; y < height; ++y) {
          T* row = dst + static_cast<std::size_t>(y) * width;
          const int sy = y + dy;
          if (sy < 0 || sy >= height || x_lo >= x_hi) {
            std::fill(row, row + width, T(0));
            continue;
          }
          std::fill(row, row + x_lo, T(0));
          std::copy(src + static_cast<std::size_t>(sy) * width + x_lo + dx,
                    src + static_cast<std::size_t>(sy) * width + x_hi + dx, row + x_lo);
          std::fill(row + x_hi, row + width, T(0));
        }
      }
    }
  }
}

// Reused patch buffer. im2col overwrites every entry, so growing it is the
// only time it needs initializing.
template <typename T> T* patch_scratch(std::size_t n) {
  thread_local std::unique_ptr<T[]> buffer;
  thread_local std::size_t capacity = 0;
  if (n > capacity) {
    buffer.reset(new T[n]);
    capacity = n;
  }
  return buffer.get();
}

template <typename T>
void col2im_add(const T* col, int channels, int height, int width, int k, T* img) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    T* dst = img + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        const int dx = kx - pad, dy = ky - pad;
        const int x_lo = std::max(0, -dx), x_hi = std::min(width, width - dx);
        for (int y = 0; y < height; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= height) continue;
          const T* row = src + static_cast<std::size_t>(y) * width;
          T* out = dst + static_cast<std::size_t>(sy) * width + dx;
          for (int x = x_lo; x < x_hi; ++x) out[x] += row[x];
        }
      }
    }
  }
}

template <typename T> Tensor<T> unary(const Tensor<T>& x, const char* op, auto&& f, auto&& df) {
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return detail::record<T>(op, x.shape(), std::move(out), {x}, [df](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(px.data[i], self.data[i]);
  });
}

// Bilinear tap for a continuous coordinate clamped to [0, n - 1].
struct Tap {
  int i0, i1;
  double frac;
  bool inside; // false when the coordinate was clamped (zero derivative)
};

Tap make_tap(double pos, int n) {
  const double hi = static_cast<double>(n - 1);
  bool inside = true;
  if (!(pos > 0.0)) { // also catches NaN
    inside = pos == 0.0;
    pos = 0.0;
  } else if (pos >= hi) {
    inside = pos == hi;
    pos = hi;
  }
  int i0 = static_cast<int>(std::floor(pos));
  if (i0 > n - 1) i0 = n - 1;
  const int i1 = std::min(i0 + 1, n - 1);
  return {i0, i1, pos - i0, inside};
}

} // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank4(x.shape(), "conv2d input");
  require_rank4(weight.shape(), "conv2d weight");
  const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != Cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, input has " + std::to_string(Cin));
  }
  if (weight.dim(3) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " + to_string(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{Cout}) {
    throw ShapeError("conv2d: bias shape " + to_string(bias.shape()) + " does not match " +
                     std::to_string(Cout) + " output channels");
  }
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const std::size_t K = static_cast<std::size_t>(Cin) * k * k;
  std::vector<T> out(static_cast<std::size_t>(B) * Cout * hw);
  T* const col = k == 1 ? nullptr : patch_scratch<T>(K * hw);
  ConstRowMap<T> wm(weight.data().data(), Cout, static_cast<Eigen::Index>(K));
  for (int b = 0; b < B; ++b) {
    const T* xb = x.data().data() + static_cast<std::size_t>(b) * Cin * hw;
    T* ob = out.data() + static_cast<std::size_t>(b) * Cout * hw;
    RowMap<T> om(ob, Cout, static_cast<Eigen::Index>(hw));
    if (k == 1) {
      om.noalias() = wm * ConstRowMap<T>(xb, Cin, static_cast<Eigen::Index>(hw));
    } else {
      im2col(xb, Cin, H, W, k, col);
      om.noalias() = wm * ConstRowMap<T>(col, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
    }
    if (bias.defined()) {
      const auto bv = bias.data();
      for (int c = 0; c < Cout; ++c) om.row(c).array() += bv[c];
    }
  }
  std::vector<Tensor<T>> parents = {x, weight};
  if (bias.defined()) parents.push_back(bias);
  return detail::record<T>(
      "conv2d", {B, Cout, H, W}, std::move(out), std::move(parents),
      [B, Cin, H, W, Cout, k, hw, K](Node<T>& self) {
        const Node<T>& px = *self.parents[0];
        const Node<T>& pw = *self.parents[1];
        const bool gx = wants_grad(self, 0), gw = wants_grad(self, 1), gb = wants_grad(self, 2);
        ConstRowMap<T> wm(pw.data.data(), Cout, static_cast<Eigen::Index>(K));
        T* const col = (gw || gx) && k != 1 ? patch_scratch<T>(K * hw) : nullptr;
        RowMat<T> dw_acc;
        if (gw) dw_acc = RowMat<T>::Zero(Cout, static_cast<Eigen::Index>(K));
        for (int b = 0; b < B; ++b) {
          ConstRowMap<T> dout(self.grad.data() + static_cast<std::size_t>(b) * Cout * hw, Cout,
                              static_cast<Eigen::Index>(hw));
          const T* xb = px.data.data() + static_cast<std::size_t>(b) * Cin * hw;
          if (gw) {
            if (k == 1) {
              dw_acc.noalias() += dout * ConstRowMap<T>(xb, Cin, static_cast<Eigen::Index>(hw)).transpose();
            } else {
              im2col(xb, Cin, H, W, k, col);
              dw_acc.noalias() +=
                  dout * ConstRowMap<T>(col, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw)).transpose();
            }
          }
          if (gb) {
            auto& g = self.parents[2]->ensure_grad();
            // plain loop: Eigen's vectorized reduction peels by pointer alignment,
            // which would make the sum order depend on where the buffer landed
            for (int c = 0; c < Cout; ++c) {
              const T* row = dout.data() + static_cast<std::size_t>(c) * hw;
              T acc = T(0);
              for (std::size_t i = 0; i < hw; ++i) acc += row[i];
              g[c] += acc;
            }
          }
          if (gx) {
            auto& g = self.parents[0]->ensure_grad();
            T* gxb = g.data() + static_cast<std::size_t>(b) * Cin * hw;
            if (k == 1) {
              RowMap<T>(gxb, Cin, static_cast<Eigen::Index>(hw)).noalias() += wm.transpose() * dout;
            } else {
              RowMap<T> cm(col, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(hw));
              cm.noalias() = wm.transpose() * dout;
              col2im_add(col, Cin, H, W, k, gxb);
            }
          }
        }
        if (gw) {
          const double fault = fault::conv_backward_perturbation();
          if (fault != 0.0) dw_acc *= static_cast<T>(1.0 + fault);
          auto& g = self.parents[1]->ensure_grad();
          RowMap<T>(g.data(), Cout, static_cast<Eigen::Index>(K)) += dw_acc;
        }
      });
}

template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary<T>(
      x, "leaky_relu", [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T in, T) { return in > T(0) ? T(1) : slope; });
}

template <typename T> Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T out) { return T(1) - out * out; });
}

template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const Shape& s = x.shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("softmax: axis out of range for shape " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  std::vector<T> out(x.numel());
  const auto in = x.data();
  std::vector<T> mx(inner), total(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * n * inner;
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<T>::infinity());
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t i = 0; i < inner; ++i) mx[i] = std::max(mx[i], in[base + a * inner + i]);
    std::fill(total.begin(), total.end(), T(0));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t i = 0; i < inner; ++i) {
        const T e = std::exp(in[base + a * inner + i] - mx[i]);
        out[base + a * inner + i] = e;
        total[i] += e;
      }
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t i = 0; i < inner; ++i) out[base + a * inner + i] /= total[i];
  }
  return detail::record<T>("softmax", s, std::move(out), {x}, [outer, n, inner](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    std::vector<T> dot(inner);
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = o * n * inner;
      std::fill(dot.begin(), dot.end(), T(0));
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < inner; ++i) dot[i] += self.grad[base + a * inner + i] * self.data[base + a * inner + i];
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t j = base + a * inner + i;
          g[j] += self.data[j] * (self.grad[j] - dot[i]);
        }
      }
    }
  });
}

template <typename T> Tensor<T> grid_sample_bilinear(const Tensor<T>& x, const Tensor<T>& flow) {
  require_rank4(x.shape(), "grid_sample_bilinear input");
  require_rank4(flow.shape(), "grid_sample_bilinear flow");
  if (flow.dim(1) != 2) {
    throw ShapeError("grid_sample_bilinear: flow must have 2 channels, got " + std::to_string(flow.dim(1)));
  }
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (flow.dim(0) != B || flow.dim(2) != H || flow.dim(3) != W) {
    throw ShapeError("grid_sample_bilinear: flow " + to_string(flow.shape()) +
                     " does not match input " + to_string(x.shape()));
  }
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const double half_w = 0.5 * (W - 1), half_h = 0.5 * (H - 1);
  std::vector<T> out(x.numel());
  const auto xd = x.data();
  const auto fd = flow.data();
  for (int b = 0; b < B; ++b) {
    const T* fx = fd.data() + static_cast<std::size_t>(b) * 2 * hw;
    const T* fy = fx + hw;
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        const std::size_t p = static_cast<std::size_t>(y) * W + xx;
        const Tap tx = make_tap(xx + static_cast<double>(fx[p]) * half_w, W);
        const Tap ty = make_tap(y + static_cast<double>(fy[p]) * half_h, H);
        const T ax = static_cast<T>(tx.frac), ay = static_cast<T>(ty.frac);
        for (int c = 0; c < C; ++c) {
          const T* img = xd.data() + (static_cast<std::size_t>(b) * C + c) * hw;
          const T v00 = img[ty.i0 * W + tx.i0], v01 = img[ty.i0 * W + tx.i1];
          const T v10 = img[ty.i1 * W + tx.i0], v11 = img[ty.i1 * W + tx.i1];
          const T top = v00 + ax * (v01 - v00);
          const T bottom = v10 + ax * (v11 - v10);
          out[(static_cast<std::size_t>(b) * C + c) * hw + p] = top + ay * (bottom - top);
        }
      }
    }
  }
  return detail::record<T>(
      "grid_sample_bilinear", x.shape(), std::move(out), {x, flow},
      [B, C, H, W, hw, half_w, half_h](Node<T>& self) {
        const Node<T>& px = *self.parents[0];
        const Node<T>& pf = *self.parents[1];
        const bool gx = wants_grad(self, 0), gf = wants_grad(self, 1);
        T* dx = gx ? self.parents[0]->ensure_grad().data() : nullptr;
        T* dflow = gf ? self.parents[1]->ensure_grad().data() : nullptr;
        for (int b = 0; b < B; ++b) {
          const T* fx = pf.data.data() + static_cast<std::size_t>(b) * 2 * hw;
          const T* fy = fx + hw;
          for (int y = 0; y < H; ++y) {
            for (int xx = 0; xx < W; ++xx) {
              const std::size_t p = static_cast<std::size_t>(y) * W + xx;
              const Tap tx = make_tap(xx + static_cast<double>(fx[p]) * half_w, W);
              const Tap ty = make_tap(y + static_cast<double>(fy[p]) * half_h, H);
              const T ax = static_cast<T>(tx.frac), ay = static_cast<T>(ty.frac);
              T dpx = 0, dpy = 0;
              for (int c = 0; c < C; ++c) {
                const std::size_t off = (static_cast<std::size_t>(b) * C + c) * hw;
                const T go = self.grad[off + p];
                if (go == T(0)) continue;
                if (gx) {
                  dx[off + ty.i0 * W + tx.i0] += go * (1 - ax) * (1 - ay);
                  dx[off + ty.i0 * W + tx.i1] += go * ax * (1 - ay);
                  dx[off + ty.i1 * W + tx.i0] += go * (1 - ax) * ay;
                  dx[off + ty.i1 * W + tx.i1] += go * ax * ay;
                }
                if (gf) {
                  const T* img = px.data.data() + off;
                  const T v00 = img[ty.i0 * W + tx.i0], v01 = img[ty.i0 * W + tx.i1];
                  const T v10 = img[ty.i1 * W + tx.i0], v11 = img[ty.i1 * W + tx.i1];
                  dpx += go * ((v01 - v00) * (1 - ay) + (v11 - v10) * ay);
                  dpy += go * ((v10 - v00) * (1 - ax) + (v11 - v01) * ax);
                }
              }
              if (gf) {
                if (tx.inside) dflow[static_cast<std::size_t>(b) * 2 * hw + p] += dpx * static_cast<T>(half_w);
                if (ty.inside) dflow[static_cast<std::size_t>(b) * 2 * hw + hw + p] += dpy * static_cast<T>(half_h);
              }
            }
          }
        }
      });
}

template <typename T> Tensor<T> downsample2(const Tensor<T>& x) {
  require_rank4(x.shape(), "downsample2");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 || W % 2) throw ShapeError("downsample2: spatial dims must be even, got " + to_string(x.shape()));
  const int h = H / 2, w = W / 2;
  std::vector<T> out(static_cast<std::size_t>(B) * C * h * w);
  const auto in = x.data();
  for (std::size_t bc = 0; bc < static_cast<std::size_t>(B) * C; ++bc) {
    const T* src = in.data() + bc * H * W;
    T* dst = out.data() + bc * h * w;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const T* q = src + (2 * y) * W + 2 * xx;
        dst[y * w + xx] = (q[0] + q[1] + q[W] + q[W + 1]) * T(0.25);
      }
  }
  return detail::record<T>("downsample2", {B, C, h, w}, std::move(out), {x}, [B, C, H, W](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    const int h = H / 2, w = W / 2;
    for (std::size_t bc = 0; bc < static_cast<std::size_t>(B) * C; ++bc) {
      T* dst = g.data() + bc * H * W;
      const T* src = self.grad.data() + bc * h * w;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const T v = src[y * w + xx] * T(0.25);
          T* q = dst + (2 * y) * W + 2 * xx;
          q[0] += v;
          q[1] += v;
          q[W] += v;
          q[W + 1] += v;
        }
    }
  });
}

template <typename T> Tensor<T> upsample2(const Tensor<T>& x) {
  require_rank4(x.shape(), "upsample2");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int oh = 2 * H, ow = 2 * W;
  std::vector<Tap> rows(oh), cols(ow);
  for (int o = 0; o < oh; ++o) rows[o] = make_tap((o + 0.5) / 2.0 - 0.5, H);
  for (int o = 0; o < ow; ++o) cols[o] = make_tap((o + 0.5) / 2.0 - 0.5, W);
  std::vector<T> out(static_cast<std::size_t>(B) * C * oh * ow);
  const auto in = x.data();
  for (std::size_t bc = 0; bc < static_cast<std::size_t>(B) * C; ++bc) {
    const T* src = in.data() + bc * H * W;
    T* dst = out.data() + bc * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const Tap& ty = rows[y];
      const T ay = static_cast<T>(ty.frac);
      for (int xx = 0; xx < ow; ++xx) {
        const Tap& tx = cols[xx];
        const T ax = static_cast<T>(tx.frac);
        const T v00 = src[ty.i0 * W + tx.i0], v01 = src[ty.i0 * W + tx.i1];
        const T v10 = src[ty.i1 * W + tx.i0], v11 = src[ty.i1 * W + tx.i1];
        const T top = v00 + ax * (v01 - v00);
        const T bottom = v10 + ax * (v11 - v10);
        dst[y * ow + xx] = top + ay * (bottom - top);
      }
    }
  }
  return detail::record<T>(
      "upsample2", {B, C, oh, ow}, std::move(out), {x},
      [B, C, H, W, rows = std::move(rows), cols = std::move(cols)](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const int oh = 2 * H, ow = 2 * W;
        for (std::size_t bc = 0; bc < static_cast<std::size_t>(B) * C; ++bc) {
          T* dst = g.data() + bc * H * W;
          const T* src = self.grad.data() + bc * oh * ow;
          for (int y = 0; y < oh; ++y) {
            const Tap& ty = rows[y];
            const T ay = static_cast<T>(ty.frac);
            for (int xx = 0; xx < ow; ++xx) {
              const Tap& tx = cols[xx];
              const T ax = static_cast<T>(tx.frac);
              const T go = src[y * ow + xx];
              dst[ty.i0 * W + tx.i0] += go * (1 - ax) * (1 - ay);
              dst[ty.i0 * W + tx.i1] += go * ax * (1 - ay);
              dst[ty.i1 * W + tx.i0] += go * (1 - ax) * ay;
              dst[ty.i1 * W + tx.i1] += go * ax * ay;
            }
          }
        }
      });
}

template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  Shape shape = xs[0].shape();
  if (axis < 0) axis += static_cast<int>(shape.size());
  if (axis < 0 || axis >= static_cast<int>(shape.size())) throw ShapeError("concat: axis out of range");
  std::vector<std::size_t> widths;
  int total = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    bool ok = s.size() == shape.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = static_cast<int>(i) == axis || s[i] == shape[i];
    if (!ok) throw ShapeError("concat: ragged shapes " + to_string(shape) + " and " + to_string(s));
    total += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  for (const auto& t : xs) widths.push_back(static_cast<std::size_t>(t.shape()[axis]) * inner);
  shape[axis] = total;
  const std::size_t row = static_cast<std::size_t>(total) * inner;
  std::vector<T> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto d = xs[k].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(d.data() + o * widths[k], widths[k], out.data() + o * row + offset);
    offset += widths[k];
  }
  return detail::record<T>("concat", shape, std::move(out), xs, [outer, row, widths](Node<T>& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (wants_grad(self, k)) {
        auto& g = self.parents[k]->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < widths[k]; ++i) g[o * widths[k] + i] += self.grad[o * row + offset + i];
      }
      offset += widths[k];
    }
  });
}

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::record<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      auto& g = self.parents[k]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return detail::record<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      auto& g = self.parents[k]->ensure_grad();
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return detail::record<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      auto& g = self.parents[k]->ensure_grad();
      const auto& other = self.parents[1 - k]->data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>(
      a, "scale", [factor](T v) { return factor * v; }, [factor](T, T) { return factor; });
}

template <typename T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  return unary<T>(
      a, "clamp", [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T in, T) { return (in >= lo && in <= hi) ? T(1) : T(0); });
}

template <typename T> Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.data()) total += v;
  return detail::record<T>("sum", {}, {total}, {a}, [](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T> Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  T total = 0;
  for (T v : a.data()) total += v;
  const T inv = T(1) / static_cast<T>(a.numel());
  return detail::record<T>("mean", {}, {total * inv}, {a}, [inv](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0] * inv;
  });
}

#define NIST_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                             \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> softmax(const Tensor<T>&, int);                                              \
  template Tensor<T> grid_sample_bilinear(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> downsample2(const Tensor<T>&);                                               \
  template Tensor<T> upsample2(const Tensor<T>&);                                                 \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);

NIST_INSTANTIATE_OPS(float)
NIST_INSTANTIATE_OPS(double)

} // namespace nist::ad
