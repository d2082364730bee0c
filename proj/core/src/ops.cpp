#include "dcl/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dcl/grad_check.hpp"
#include "ops_common.hpp"

namespace dcl {

using detail::TensorImpl;

namespace {

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

// Outer x axis x inner decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i < axis) s.outer *= shape[i];
    else if (i == axis) s.extent = shape[i];
    else s.inner *= shape[i];
  }
  return s;
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const char* op, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x},
                        [x, deriv](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          auto xv = x.data();
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            g[i] += o.grad[i] * deriv(xv[i], o.data[i]);
                          }
                        });
}

// Maps every flat input index to its flat output index after dropping axes.
struct Reduction {
  Shape out_shape;
  std::vector<std::size_t> target;
  std::size_t count = 1;  // elements folded into each output
};

Reduction plan_reduction(const Shape& shape, const std::vector<std::size_t>& axes) {
  std::vector<bool> drop(shape.size(), false);
  for (std::size_t a : axes) {
    if (a >= shape.size()) {
      throw std::invalid_argument("reduce: axis " + std::to_string(a) + " out of range for " +
                                  shape_str(shape));
    }
    if (drop[a]) throw std::invalid_argument("reduce: duplicate axis " + std::to_string(a));
    drop[a] = true;
  }
  Reduction r;
  std::vector<std::size_t> out_stride(shape.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    if (drop[i]) {
      r.count *= shape[i];
    } else {
      out_stride[i] = stride;
      stride *= shape[i];
    }
  }
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!drop[i]) r.out_shape.push_back(shape[i]);
  }
  const std::size_t n = shape_numel(shape);
  r.target.resize(n);
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t flat_out = 0;
  for (std::size_t f = 0; f < n; ++f) {
    r.target[f] = flat_out;
    for (std::size_t d = shape.size(); d-- > 0;) {
      ++idx[d];
      flat_out += out_stride[d];
      if (idx[d] < shape[d]) break;
      flat_out -= out_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return r;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b},
                        [a, b](const TensorImpl<T>& o) {
                          accumulate(a, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                          });
                          accumulate(b, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                          });
                        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b},
                        [a, b](const TensorImpl<T>& o) {
                          accumulate(a, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                          });
                          accumulate(b, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
                          });
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b},
                        [a, b](const TensorImpl<T>& o) {
                          auto xa = a.data(), xb = b.data();
                          accumulate(a, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * xb[i];
                          });
                          accumulate(b, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * xa[i];
                          });
                        });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("div", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  return make_result<T>("div", a.shape(), std::move(out), {a, b},
                        [a, b](const TensorImpl<T>& o) {
                          auto xb = b.data();
                          accumulate(a, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] / xb[i];
                          });
                          accumulate(b, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              g[i] -= o.grad[i] * o.data[i] / xb[i];
                            }
                          });
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary<T>("scale", x, [factor](T v) { return v * factor; },
                  [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary<T>("add_scalar", x, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  BranchProbe::observe(x.data());
  return unary<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); },
                  [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() < 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw std::invalid_argument("add_bias: bias " + shape_str(bias.shape()) +
                                " does not match axis 1 of " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), 1);
  auto in = x.data();
  auto b = bias.data();
  std::vector<T> out(in.begin(), in.end());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < s.extent; ++c) {
      T* row = out.data() + (o * s.extent + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) row[i] += b[c];
    }
  return make_result<T>("add_bias", x.shape(), std::move(out), {x, bias},
                        [x, bias, s](const TensorImpl<T>& o) {
                          accumulate(x, [&](std::span<T> g) {
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                          });
                          accumulate(bias, [&](std::span<T> g) {
                            for (std::size_t n = 0; n < s.outer; ++n)
                              for (std::size_t c = 0; c < s.extent; ++c) {
                                const T* row = o.grad.data() + (n * s.extent + c) * s.inner;
                                T acc = 0;
                                for (std::size_t i = 0; i < s.inner; ++i) acc += row[i];
                                g[c] += acc;
                              }
                          });
                        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  MatMap<T>(out.data(), m, n).noalias() = ConstMatMap<T>(a.data().data(), m, k) *
                                          ConstMatMap<T>(b.data().data(), k, n);
  return make_result<T>("matmul", {m, n}, std::move(out), {a, b},
                        [a, b, m, k, n](const TensorImpl<T>& o) {
                          ConstMatMap<T> go(o.grad.data(), m, n);
                          accumulate(a, [&](std::span<T> g) {
                            MatMap<T>(g.data(), m, k).noalias() +=
                                go * ConstMatMap<T>(b.data().data(), k, n).transpose();
                          });
                          accumulate(b, [&](std::span<T> g) {
                            MatMap<T>(g.data(), k, n).noalias() +=
                                ConstMatMap<T>(a.data().data(), m, k).transpose() * go;
                          });
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) throw std::invalid_argument("transpose: expects a matrix, got " +
                                                 shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto in = x.data();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return make_result<T>("transpose", {c, r}, std::move(out), {x}, [x, r, c](const TensorImpl<T>& o) {
    auto g = x.impl().ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(shape));
  }
  auto in = x.data();
  return make_result<T>("reshape", std::move(shape), std::vector<T>(in.begin(), in.end()), {x},
                        [x](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
                        });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  if (logits.rank() < 2 || logits.dim(1) < 1) {
    throw std::invalid_argument("softmax_channels: expects N x C x ..., got " +
                                shape_str(logits.shape()));
  }
  const AxisSplit s = split_at(logits.shape(), 1);
  auto in = logits.data();
  for (T v : in) {
    if (!std::isfinite(v)) throw std::domain_error("softmax_channels: non-finite logit");
  }
  std::vector<T> out(in.size());
  for (std::size_t n = 0; n < s.outer; ++n)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = n * s.extent * s.inner + i;
      T mx = in[base];
      for (std::size_t c = 1; c < s.extent; ++c) mx = std::max(mx, in[base + c * s.inner]);
      T z = 0;
      for (std::size_t c = 0; c < s.extent; ++c) {
        const T e = std::exp(in[base + c * s.inner] - mx);
        out[base + c * s.inner] = e;
        z += e;
      }
      for (std::size_t c = 0; c < s.extent; ++c) out[base + c * s.inner] /= z;
    }
  return make_result<T>("softmax_channels", logits.shape(), std::move(out), {logits},
                        [logits, s](const TensorImpl<T>& o) {
                          auto g = logits.impl().ensure_grad();
                          for (std::size_t n = 0; n < s.outer; ++n)
                            for (std::size_t i = 0; i < s.inner; ++i) {
                              const std::size_t base = n * s.extent * s.inner + i;
                              T dot = 0;
                              for (std::size_t c = 0; c < s.extent; ++c) {
                                dot += o.grad[base + c * s.inner] * o.data[base + c * s.inner];
                              }
                              for (std::size_t c = 0; c < s.extent; ++c) {
                                const std::size_t k = base + c * s.inner;
                                g[k] += o.data[k] * (o.grad[k] - dot);
                              }
                            }
                        });
}

template <typename T>
Tensor<T> log_softmax_channels(const Tensor<T>& logits) {
  if (logits.rank() < 2 || logits.dim(1) < 1) {
    throw std::invalid_argument("log_softmax_channels: expects N x C x ..., got " +
                                shape_str(logits.shape()));
  }
  const AxisSplit s = split_at(logits.shape(), 1);
  auto in = logits.data();
  for (T v : in) {
    if (!std::isfinite(v)) throw std::domain_error("log_softmax_channels: non-finite logit");
  }
  std::vector<T> out(in.size());
  for (std::size_t n = 0; n < s.outer; ++n)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = n * s.extent * s.inner + i;
      T mx = in[base];
      for (std::size_t c = 1; c < s.extent; ++c) mx = std::max(mx, in[base + c * s.inner]);
      T z = 0;
      for (std::size_t c = 0; c < s.extent; ++c) z += std::exp(in[base + c * s.inner] - mx);
      const T lse = mx + std::log(z);
      for (std::size_t c = 0; c < s.extent; ++c) out[base + c * s.inner] = in[base + c * s.inner] - lse;
    }
  return make_result<T>("log_softmax_channels", logits.shape(), std::move(out), {logits},
                        [logits, s](const TensorImpl<T>& o) {
                          auto g = logits.impl().ensure_grad();
                          for (std::size_t n = 0; n < s.outer; ++n)
                            for (std::size_t i = 0; i < s.inner; ++i) {
                              const std::size_t base = n * s.extent * s.inner + i;
                              T total = 0;
                              for (std::size_t c = 0; c < s.extent; ++c) total += o.grad[base + c * s.inner];
                              for (std::size_t c = 0; c < s.extent; ++c) {
                                const std::size_t k = base + c * s.inner;
                                g[k] += o.grad[k] - std::exp(o.data[k]) * total;
                              }
                            }
                        });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x, const std::vector<std::uint8_t>& include) {
  if (x.rank() != 2) {
    throw std::invalid_argument("log_softmax_rows: expects a matrix, got " + shape_str(x.shape()));
  }
  if (!include.empty() && include.size() != x.numel()) {
    throw std::invalid_argument("log_softmax_rows: mask size " + std::to_string(include.size()) +
                                " does not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<std::uint8_t> keep = include.empty() ? std::vector<std::uint8_t>(x.numel(), 1) : include;
  auto in = x.data();
  std::vector<T> out(in.size(), T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * cols;
    const std::uint8_t* k = keep.data() + r * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < cols; ++c) if (k[c]) mx = std::max(mx, row[c]);
    if (mx == -std::numeric_limits<T>::infinity()) continue;
    T z = 0;
    for (std::size_t c = 0; c < cols; ++c) if (k[c]) z += std::exp(row[c] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) if (k[c]) out[r * cols + c] = row[c] - lse;
  }
  return make_result<T>("log_softmax_rows", x.shape(), std::move(out), {x},
                        [x, keep = std::move(keep), rows, cols](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          for (std::size_t r = 0; r < rows; ++r) {
                            const std::size_t base = r * cols;
                            T total = 0;
                            for (std::size_t c = 0; c < cols; ++c) if (keep[base + c]) total += o.grad[base + c];
                            for (std::size_t c = 0; c < cols; ++c) {
                              if (!keep[base + c]) continue;
                              g[base + c] += o.grad[base + c] - std::exp(o.data[base + c]) * total;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& v, std::size_t axis) {
  if (axis >= v.rank()) {
    throw std::invalid_argument("l2_normalize: axis " + std::to_string(axis) + " out of range for " +
                                shape_str(v.shape()));
  }
  const AxisSplit s = split_at(v.shape(), axis);
  auto in = v.data();
  std::vector<T> out(in.size());
  std::vector<T> norms(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      T sq = 0;
      for (std::size_t k = 0; k < s.extent; ++k) sq += in[base + k * s.inner] * in[base + k * s.inner];
      const T norm = std::sqrt(sq);
      if (!(norm > T(kNormEpsilon))) {
        throw std::domain_error("l2_normalize: degenerate vector (norm <= 1e-8)");
      }
      norms[o * s.inner + i] = norm;
      for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] = in[base + k * s.inner] / norm;
    }
  return make_result<T>("l2_normalize", v.shape(), std::move(out), {v},
                        [v, s, norms = std::move(norms)](const TensorImpl<T>& o) {
                          auto g = v.impl().ensure_grad();
                          for (std::size_t n = 0; n < s.outer; ++n)
                            for (std::size_t i = 0; i < s.inner; ++i) {
                              const std::size_t base = n * s.extent * s.inner + i;
                              T dot = 0;
                              for (std::size_t k = 0; k < s.extent; ++k) {
                                dot += o.grad[base + k * s.inner] * o.data[base + k * s.inner];
                              }
                              const T inv = T(1) / norms[n * s.inner + i];
                              for (std::size_t k = 0; k < s.extent; ++k) {
                                const std::size_t f = base + k * s.inner;
                                g[f] += (o.grad[f] - o.data[f] * dot) * inv;
                              }
                            }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  Reduction plan = plan_reduction(x.shape(), axes);
  auto in = x.data();
  std::vector<T> out(shape_numel(plan.out_shape), T(0));
  for (std::size_t f = 0; f < in.size(); ++f) out[plan.target[f]] += in[f];
  return make_result<T>("sum", plan.out_shape, std::move(out), {x},
                        [x, target = std::move(plan.target)](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          for (std::size_t f = 0; f < g.size(); ++f) g[f] += o.grad[target[f]];
                        });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  Reduction plan = plan_reduction(x.shape(), axes);
  if (plan.count == 0) throw std::invalid_argument("mean: reduction over an empty axis");
  auto in = x.data();
  std::vector<T> out(shape_numel(plan.out_shape), T(0));
  for (std::size_t f = 0; f < in.size(); ++f) out[plan.target[f]] += in[f];
  const T inv = T(1) / static_cast<T>(plan.count);
  for (T& v : out) v *= inv;
  return make_result<T>("mean", plan.out_shape, std::move(out), {x},
                        [x, inv, target = std::move(plan.target)](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          for (std::size_t f = 0; f < g.size(); ++f) g[f] += o.grad[target[f]] * inv;
                        });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  auto in = x.data();
  T acc = std::accumulate(in.begin(), in.end(), T(0));
  return make_result<T>("sum_all", {}, {acc}, {x}, [x](const TensorImpl<T>& o) {
    auto g = x.impl().ensure_grad();
    for (T& v : g) v += o.grad[0];
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean_all: empty tensor");
  auto in = x.data();
  const T inv = T(1) / static_cast<T>(in.size());
  T acc = std::accumulate(in.begin(), in.end(), T(0)) * inv;
  return make_result<T>("mean_all", {}, {acc}, {x}, [x, inv](const TensorImpl<T>& o) {
    auto g = x.impl().ensure_grad();
    for (T& v : g) v += o.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> select(const Tensor<T>& x, std::size_t index) {
  if (x.rank() < 1 || index >= x.dim(0)) {
    throw std::invalid_argument("select: index " + std::to_string(index) + " out of range for " +
                                shape_str(x.shape()));
  }
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t block = shape_numel(shape);
  auto in = x.data().subspan(index * block, block);
  return make_result<T>("select", std::move(shape), std::vector<T>(in.begin(), in.end()), {x},
                        [x, index, block](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad().subspan(index * block, block);
                          for (std::size_t i = 0; i < block; ++i) g[i] += o.grad[i];
                        });
}

template <typename T>
Tensor<T> index_select(const Tensor<T>& x, const std::vector<std::size_t>& flat_indices,
                       Shape shape) {
  if (shape_numel(shape) != flat_indices.size()) {
    throw std::invalid_argument("index_select: " + std::to_string(flat_indices.size()) +
                                " indices do not fill " + shape_str(shape));
  }
  auto in = x.data();
  std::vector<T> out(flat_indices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (flat_indices[i] >= in.size()) {
      throw std::out_of_range("index_select: index " + std::to_string(flat_indices[i]) +
                              " out of range for " + shape_str(x.shape()));
    }
    out[i] = in[flat_indices[i]];
  }
  return make_result<T>("index_select", std::move(shape), std::move(out), {x},
                        [x, flat_indices](const TensorImpl<T>& o) {
                          auto g = x.impl().ensure_grad();
                          for (std::size_t i = 0; i < flat_indices.size(); ++i) {
                            g[flat_indices[i]] += o.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> masked_select(const Tensor<T>& x, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != x.numel()) {
    throw std::invalid_argument("masked_select: mask of " + std::to_string(mask.size()) +
                                " entries for " + shape_str(x.shape()));
  }
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < mask.size(); ++i) if (mask[i]) picked.push_back(i);
  const std::size_t n = picked.size();
  return index_select(x, picked, Shape{n});
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    if (p.rank() < 1 || Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
      throw std::invalid_argument("concat_rows: part " + shape_str(p.shape()) +
                                  " incompatible with trailing shape " + shape_str(tail));
    }
    rows += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return make_result<T>("concat_rows", std::move(shape), std::move(out), parts,
                        [parts](const TensorImpl<T>& o) {
                          std::size_t offset = 0;
                          for (const auto& p : parts) {
                            const std::size_t n = p.numel();
                            accumulate(p, [&](std::span<T> g) {
                              for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[offset + i];
                            });
                            offset += n;
                          }
                        });
}

#define DCL_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scale(const Tensor<T>&, T);                                            \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                       \
  template Tensor<T> exp(const Tensor<T>&);                                                 \
  template Tensor<T> log(const Tensor<T>&);                                                 \
  template Tensor<T> relu(const Tensor<T>&);                                                \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> transpose(const Tensor<T>&);                                           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                      \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                    \
  template Tensor<T> log_softmax_channels(const Tensor<T>&);                                \
  template Tensor<T> log_softmax_rows(const Tensor<T>&, const std::vector<std::uint8_t>&);  \
  template Tensor<T> l2_normalize(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> sum(const Tensor<T>&, const std::vector<std::size_t>&);                \
  template Tensor<T> mean(const Tensor<T>&, const std::vector<std::size_t>&);               \
  template Tensor<T> sum_all(const Tensor<T>&);                                             \
  template Tensor<T> mean_all(const Tensor<T>&);                                            \
  template Tensor<T> select(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> index_select(const Tensor<T>&, const std::vector<std::size_t>&, Shape); \
  template Tensor<T> masked_select(const Tensor<T>&, const std::vector<std::uint8_t>&);     \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);

DCL_INSTANTIATE_OPS(float)
DCL_INSTANTIATE_OPS(double)

}  // namespace dcl
