#include <algorithm>
#include <limits>
#include <vector>

#include "dcl/grad_check.hpp"
#include "dcl/ops.hpp"
#include "ops_common.hpp"

namespace dcl {

using detail::TensorImpl;

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;     // input
  std::size_t o, kh, kw;      // kernel
  std::size_t stride, pad;
  std::size_t ho, wo;         // output
  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T(0) : src[ix];
          }
        }
      }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          T* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const T* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
}

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride,
                           std::size_t padding) {
  if (input.rank() != 4) {
    throw std::invalid_argument("conv2d: input must be N x C x H x W, got " +
                                shape_str(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: kernel must be O x C x Kh x Kw, got " +
                                shape_str(kernel.shape()));
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, padding, 0, 0};
  if (kernel.dim(1) != g.c) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(g.c) +
                                " != kernel input channels " + std::to_string(kernel.dim(1)));
  }
  const std::size_t ph = g.h + 2 * padding, pw = g.w + 2 * padding;
  if (ph < g.kh || pw < g.kw) {
    throw std::invalid_argument("conv2d: padded input " + std::to_string(ph) + "x" +
                                std::to_string(pw) + " smaller than kernel " +
                                std::to_string(g.kh) + "x" + std::to_string(g.kw));
  }
  if ((ph - g.kh) % stride != 0 || (pw - g.kw) % stride != 0) {
    throw std::invalid_argument("conv2d: padded extent " + std::to_string(ph) + "x" +
                                std::to_string(pw) + " minus kernel not divisible by stride " +
                                std::to_string(stride));
  }
  g.ho = (ph - g.kh) / stride + 1;
  g.wo = (pw - g.kw) / stride + 1;
  return g;
}

void check_nchw(const char* op, const Shape& s) {
  if (s.size() != 4) {
    throw std::invalid_argument(std::string(op) + ": expects N x C x H x W, got " + shape_str(s));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride,
                 std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernel, stride, padding);
  std::vector<T> out(g.n * g.o * g.pixels());
  std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.pixels());
  ConstMatMap<T> weights(kernel.data().data(), g.o, g.patch());
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* img = input.data().data() + n * g.c * g.h * g.w;
    const T* cols = img;
    if (!g.pointwise()) {
      im2col(img, g, col.data());
      cols = col.data();
    }
    MatMap<T>(out.data() + n * g.o * g.pixels(), g.o, g.pixels()).noalias() =
        weights * ConstMatMap<T>(cols, g.patch(), g.pixels());
  }
  return make_result<T>(
      "conv2d", {g.n, g.o, g.ho, g.wo}, std::move(out), {input, kernel},
      [input, kernel, g](const TensorImpl<T>& o) {
        std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.pixels());
        std::vector<T> dcol(input.requires_grad() && !g.pointwise() ? col.size() : 0);
        ConstMatMap<T> weights(kernel.data().data(), g.o, g.patch());
        for (std::size_t n = 0; n < g.n; ++n) {
          ConstMatMap<T> gout(o.grad.data() + n * g.o * g.pixels(), g.o, g.pixels());
          const std::size_t img_offset = n * g.c * g.h * g.w;
          if (kernel.requires_grad()) {
            const T* img = input.data().data() + img_offset;
            const T* cols = img;
            if (!g.pointwise()) {
              im2col(img, g, col.data());
              cols = col.data();
            }
            MatMap<T>(kernel.impl().ensure_grad().data(), g.o, g.patch()).noalias() +=
                gout * ConstMatMap<T>(cols, g.patch(), g.pixels()).transpose();
          }
          if (input.requires_grad()) {
            T* gin = input.impl().ensure_grad().data() + img_offset;
            if (g.pointwise()) {
              MatMap<T>(gin, g.patch(), g.pixels()).noalias() += weights.transpose() * gout;
            } else {
              MatMap<T>(dcol.data(), g.patch(), g.pixels()).noalias() = weights.transpose() * gout;
              col2im_add(dcol.data(), g, gin);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  check_nchw("upsample_nearest2x", x.shape());
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t h2 = 2 * h, w2 = 2 * w;
  auto in = x.data();
  std::vector<T> out(planes * h2 * w2);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h2; ++y) {
      const T* src = in.data() + (p * h + y / 2) * w;
      T* dst = out.data() + (p * h2 + y) * w2;
      for (std::size_t xx = 0; xx < w2; ++xx) dst[xx] = src[xx / 2];
    }
  return make_result<T>("upsample_nearest2x", {x.dim(0), x.dim(1), h2, w2}, std::move(out), {x},
                        [x, planes, h, w](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          const std::size_t w2 = 2 * w;
                          for (std::size_t p = 0; p < planes; ++p)
                            for (std::size_t y = 0; y < 2 * h; ++y) {
                              T* dst = g.data() + (p * h + y / 2) * w;
                              const T* src = o.grad.data() + (p * 2 * h + y) * w2;
                              for (std::size_t xx = 0; xx < w2; ++xx) dst[xx / 2] += src[xx];
                            }
                        });
}

template <typename T>
Tensor<T> max_pool2x2(const Tensor<T>& x) {
  check_nchw("max_pool2x2", x.shape());
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("max_pool2x2: spatial dims " + std::to_string(h) + "x" +
                                std::to_string(w) + " not even");
  }
  const std::size_t ho = h / 2, wo = w / 2;
  auto in = x.data();
  std::vector<T> out(planes * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        std::size_t best = (p * h + 2 * y) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t k = (p * h + 2 * y + dy) * w + 2 * xx + dx;
            if (in[k] > in[best]) best = k;
          }
        const std::size_t f = (p * ho + y) * wo + xx;
        out[f] = in[best];
        argmax[f] = best;
      }
  BranchProbe::observe_selection(argmax);
  return make_result<T>("max_pool2x2", {x.dim(0), x.dim(1), ho, wo}, std::move(out), {x},
                        [x, argmax = std::move(argmax)](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          for (std::size_t f = 0; f < argmax.size(); ++f) g[argmax[f]] += o.grad[f];
                        });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  check_nchw("concat_channels", a.shape());
  check_nchw("concat_channels", b.shape());
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw std::invalid_argument("concat_channels: " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()) + " differ outside the channel axis");
  }
  const std::size_t n = a.dim(0), plane = a.dim(2) * a.dim(3);
  const std::size_t ablock = a.dim(1) * plane, bblock = b.dim(1) * plane;
  std::vector<T> out;
  out.reserve(n * (ablock + bblock));
  for (std::size_t i = 0; i < n; ++i) {
    auto ai = a.data().subspan(i * ablock, ablock);
    auto bi = b.data().subspan(i * bblock, bblock);
    out.insert(out.end(), ai.begin(), ai.end());
    out.insert(out.end(), bi.begin(), bi.end());
  }
  return make_result<T>("concat_channels", {n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)},
                        std::move(out), {a, b},
                        [a, b, n, ablock, bblock](const TensorImpl<T>& o) {
                          for (std::size_t i = 0; i < n; ++i) {
                            const T* src = o.grad.data() + i * (ablock + bblock);
                            accumulate(a, [&](std::span<T> g) {
                              for (std::size_t k = 0; k < ablock; ++k) g[i * ablock + k] += src[k];
                            });
                            accumulate(b, [&](std::span<T> g) {
                              for (std::size_t k = 0; k < bblock; ++k) {
                                g[i * bblock + k] += src[ablock + k];
                              }
                            });
                          }
                        });
}

#define DCL_INSTANTIATE_SPATIAL(T)                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                           \
  template Tensor<T> max_pool2x2(const Tensor<T>&);                                  \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);

DCL_INSTANTIATE_SPATIAL(float)
DCL_INSTANTIATE_SPATIAL(double)

}  // namespace dcl
