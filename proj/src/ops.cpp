#include "adn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>

namespace adn {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(s));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// Maps a padded coordinate onto the source axis; -1 means zero padding.
std::int64_t map_index(std::int64_t i, std::int64_t n, PadMode mode) {
  if (i >= 0 && i < n) return i;
  if (mode == PadMode::zero) return -1;
  if (i < 0) return -i;
  return 2 * (n - 1) - i;
}

struct ConvGeometry {
  std::int64_t n, cin, h, w, cout, k, ho, wo;
  int stride, padding;
  PadMode mode;
  std::vector<std::int64_t> row_map;  // [k][ho]
  std::vector<std::int64_t> col_map;  // [k][wo]
  // Per kernel column: output columns [lo, hi) read source column ox*stride + kj - padding.
  std::vector<std::int64_t> col_lo, col_hi;

  std::int64_t patch() const { return cin * k * k; }
  std::int64_t pixels() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Shape& in, const Shape& wt, int stride, int padding, PadMode mode) {
  require_rank(in, 4, "conv2d");
  require_rank(wt, 4, "conv2d weight");
  if (wt[1] != in[1]) {
    throw DimensionError("conv2d: input has " + std::to_string(in[1]) + " channels, weight expects " +
                         std::to_string(wt[1]));
  }
  if (wt[2] != wt[3]) throw DimensionError("conv2d: kernel must be square, got " + shape_str(wt));
  if (stride < 1 || padding < 0) throw ArgumentError("conv2d: stride must be >= 1 and padding >= 0");
  ConvGeometry g{in[0], in[1], in[2], in[3], wt[0], wt[2], 0, 0, stride, padding, mode, {}, {}, {}, {}};
  if (g.k > g.h + 2 * padding || g.k > g.w + 2 * padding) {
    throw ArgumentError("conv2d: kernel " + std::to_string(g.k) + " larger than padded input " + shape_str(in));
  }
  if (mode == PadMode::reflect && (padding >= g.h || padding >= g.w)) {
    throw ArgumentError("conv2d: reflect padding " + std::to_string(padding) + " too wide for input " +
                        shape_str(in));
  }
  g.ho = (g.h + 2 * padding - g.k) / stride + 1;
  g.wo = (g.w + 2 * padding - g.k) / stride + 1;
  g.row_map.resize(static_cast<std::size_t>(g.k * g.ho));
  g.col_map.resize(static_cast<std::size_t>(g.k * g.wo));
  g.col_lo.assign(static_cast<std::size_t>(g.k), 0);
  g.col_hi.assign(static_cast<std::size_t>(g.k), 0);
  for (std::int64_t ki = 0; ki < g.k; ++ki) {
    for (std::int64_t o = 0; o < g.ho; ++o) g.row_map[ki * g.ho + o] = map_index(o * stride - padding + ki, g.h, mode);
    std::int64_t lo = g.wo, hi = 0;
    for (std::int64_t o = 0; o < g.wo; ++o) {
      const std::int64_t src = o * stride - padding + ki;
      g.col_map[ki * g.wo + o] = map_index(src, g.w, mode);
      if (src >= 0 && src < g.w) {
        lo = std::min(lo, o);
        hi = std::max(hi, o + 1);
      }
    }
    g.col_lo[ki] = std::min(lo, hi);
    g.col_hi[ki] = hi;
  }
  return g;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* img, T* cols) {
  T* dst = cols;
  const std::int64_t s = g.stride;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    const T* plane = img + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        const std::int64_t* cmap = &g.col_map[kj * g.wo];
        const std::int64_t lo = g.col_lo[kj], hi = g.col_hi[kj], off = kj - g.padding;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t r = g.row_map[ki * g.ho + oy];
          if (r < 0) {
            std::fill(dst, dst + g.wo, T(0));
          } else {
            const T* row = plane + r * g.w;
            for (std::int64_t ox = 0; ox < lo; ++ox) dst[ox] = cmap[ox] < 0 ? T(0) : row[cmap[ox]];
            if (s == 1) {
              for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] = row[ox + off];
            } else {
              for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] = row[ox * s + off];
            }
            for (std::int64_t ox = hi; ox < g.wo; ++ox) dst[ox] = cmap[ox] < 0 ? T(0) : row[cmap[ox]];
          }
          dst += g.wo;
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, T* img) {
  const T* src = cols;
  const std::int64_t s = g.stride;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    T* plane = img + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        const std::int64_t* cmap = &g.col_map[kj * g.wo];
        const std::int64_t lo = g.col_lo[kj], hi = g.col_hi[kj], off = kj - g.padding;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t r = g.row_map[ki * g.ho + oy];
          if (r >= 0) {
            T* row = plane + r * g.w;
            for (std::int64_t ox = 0; ox < lo; ++ox) {
              if (cmap[ox] >= 0) row[cmap[ox]] += src[ox];
            }
            if (s == 1) {
              for (std::int64_t ox = lo; ox < hi; ++ox) row[ox + off] += src[ox];
            } else {
              for (std::int64_t ox = lo; ox < hi; ++ox) row[ox * s + off] += src[ox];
            }
            for (std::int64_t ox = hi; ox < g.wo; ++ox) {
              if (cmap[ox] >= 0) row[cmap[ox]] += src[ox];
            }
          }
          src += g.wo;
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> unary(const char* op, const BasicTensor<T>& x, std::vector<T> out,
                     std::function<void(const detail::TensorImpl<T>& out, std::vector<T>& gx)> grad,
                     std::optional<Shape> out_shape = std::nullopt) {
  auto xi = x.impl();
  return detail::make_result<T>(op, out_shape ? std::move(*out_shape) : x.shape(), std::move(out), {xi},
                                [xi, grad = std::move(grad)](const detail::TensorImpl<T>& o) {
                                  if (!xi->requires_grad) return;
                                  grad(o, xi->grad_buffer());
                                });
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, int stride, int padding, PadMode pad_mode) {
  const ConvGeometry g = conv_geometry(input.shape(), weight.shape(), stride, padding, pad_mode);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw DimensionError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(g.cout) + " output channels");
  }
  const std::int64_t K = g.patch(), P = g.pixels();
  std::vector<T> out(static_cast<std::size_t>(g.n * g.cout * P));
  // Every Eigen operand is Eigen-owned (aligned) storage. With one output
  // channel Eigen picks a matrix-vector kernel whose summation order depends
  // on the operands' addresses, which would break run-to-run determinism.
  MatR<T> cols(K, P), om(g.cout, P);
  const MatR<T> wm = Eigen::Map<const MatR<T>>(weight.data().data(), g.cout, K);
  for (std::int64_t n = 0; n < g.n; ++n) {
    im2col(g, input.data().data() + n * g.cin * g.h * g.w, cols.data());
    om.noalias() = wm * cols;
    if (bias.defined()) {
      for (std::int64_t co = 0; co < g.cout; ++co) om.row(co).array() += bias.data()[co];
    }
    std::copy_n(om.data(), g.cout * P, out.data() + n * g.cout * P);
  }
  auto xi = input.impl();
  auto wi = weight.impl();
  auto bi = bias.defined() ? bias.impl() : nullptr;
  std::vector<ImplPtr<T>> inputs{xi, wi};
  if (bi) inputs.push_back(bi);
  return detail::make_result<T>(
      "conv2d", Shape{g.n, g.cout, g.ho, g.wo}, std::move(out), std::move(inputs),
      [g, xi, wi, bi](const detail::TensorImpl<T>& o) {
        const std::int64_t K = g.patch(), P = g.pixels();
        const MatR<T> wm = Eigen::Map<const MatR<T>>(wi->data.data(), g.cout, K);
        MatR<T> cols(K, P);
        MatR<T> dcols;
        MatR<T> go(g.cout, P);
        MatR<T> dw = MatR<T>::Zero(g.cout, K);
        for (std::int64_t n = 0; n < g.n; ++n) {
          std::copy_n(o.grad.data() + n * g.cout * P, g.cout * P, go.data());
          if (wi->requires_grad) {
            im2col(g, xi->data.data() + n * g.cin * g.h * g.w, cols.data());
            dw.noalias() += go * cols.transpose();
          }
          if (bi && bi->requires_grad) {
            auto& gb = bi->grad_buffer();
            for (std::int64_t co = 0; co < g.cout; ++co) gb[co] += go.row(co).sum();
          }
          if (xi->requires_grad) {
            dcols.noalias() = wm.transpose() * go;
            col2im(g, dcols.data(), xi->grad_buffer().data() + n * g.cin * g.h * g.w);
          }
        }
        if (wi->requires_grad) {
          auto& gw = wi->grad_buffer();
          for (std::int64_t i = 0; i < g.cout * K; ++i) gw[i] += dw.data()[i];
        }
      });
}

template <typename T>
BasicTensor<T> nearest_upsample(const BasicTensor<T>& input, int factor) {
  if (factor < 1) throw ArgumentError("nearest_upsample: factor must be >= 1, got " + std::to_string(factor));
  require_rank(input.shape(), 4, "nearest_upsample");
  const auto& s = input.shape();
  const std::int64_t planes = s[0] * s[1], h = s[2], w = s[3], f = factor;
  const std::int64_t H = h * f, W = w * f;
  std::vector<T> out(static_cast<std::size_t>(planes * H * W));
  const T* src = input.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t i = 0; i < H; ++i) {
      for (std::int64_t j = 0; j < W; ++j) out[(p * H + i) * W + j] = src[(p * h + i / f) * w + j / f];
    }
  }
  return unary<T>("nearest_upsample", input, std::move(out),
                  [planes, h, w, f, H, W](const detail::TensorImpl<T>& o, std::vector<T>& gx) {
                    for (std::int64_t p = 0; p < planes; ++p) {
                      for (std::int64_t i = 0; i < H; ++i) {
                        for (std::int64_t j = 0; j < W; ++j) gx[(p * h + i / f) * w + j / f] += o.grad[(p * H + i) * W + j];
                      }
                    }
                  },
                  Shape{s[0], s[1], H, W});
}

template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& input, int factor) {
  if (factor < 1) throw ArgumentError("avg_pool2d: factor must be >= 1");
  require_rank(input.shape(), 4, "avg_pool2d");
  const auto& s = input.shape();
  const std::int64_t f = factor;
  if (s[2] % f || s[3] % f) throw DimensionError("avg_pool2d: " + shape_str(s) + " not divisible by factor");
  const std::int64_t planes = s[0] * s[1], H = s[2], W = s[3], h = H / f, w = W / f;
  const T inv = T(1) / static_cast<T>(f * f);
  // Wide accumulation and a true division keep pooling of a constant block
  // exact, so upsample followed by pooling round-trips.
  std::vector<long double> acc(static_cast<std::size_t>(planes * h * w), 0.0L);
  const T* src = input.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t i = 0; i < H; ++i) {
      for (std::int64_t j = 0; j < W; ++j) acc[(p * h + i / f) * w + j / f] += src[(p * H + i) * W + j];
    }
  }
  std::vector<T> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<T>(acc[k] / static_cast<long double>(f * f));
  Shape shape{s[0], s[1], h, w};
  auto xi = input.impl();
  return detail::make_result<T>("avg_pool2d", shape, std::move(out), {xi},
                                [xi, planes, h, w, f, H, W, inv](const detail::TensorImpl<T>& o) {
                                  if (!xi->requires_grad) return;
                                  auto& gx = xi->grad_buffer();
                                  for (std::int64_t p = 0; p < planes; ++p) {
                                    for (std::int64_t i = 0; i < H; ++i) {
                                      for (std::int64_t j = 0; j < W; ++j) {
                                        gx[(p * H + i) * W + j] += inv * o.grad[(p * h + i / f) * w + j / f];
                                      }
                                    }
                                  }
                                });
}

template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& input, const BasicTensor<T>& gain,
                             const BasicTensor<T>& shift, double eps) {
  require_rank(input.shape(), 4, "instance_norm");
  const auto& s = input.shape();
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  if (HW < 2) throw ArgumentError("instance_norm: needs at least 2 pixels per plane, got " + shape_str(s));
  if (gain.shape() != Shape{C} || shift.shape() != Shape{C}) {
    throw DimensionError("instance_norm: gain/shift must have shape [" + std::to_string(C) + "]");
  }
  std::vector<T> xhat(input.numel());
  std::vector<T> inv_std(static_cast<std::size_t>(N * C));
  std::vector<T> out(input.numel());
  const T* x = input.data().data();
  for (std::int64_t p = 0; p < N * C; ++p) {
    const T* src = x + p * HW;
    double m = 0.0;
    for (std::int64_t i = 0; i < HW; ++i) m += src[i];
    m /= static_cast<double>(HW);
    double var = 0.0;
    for (std::int64_t i = 0; i < HW; ++i) var += (src[i] - m) * (src[i] - m);
    var /= static_cast<double>(HW);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[p] = static_cast<T>(is);
    const T g = gain.data()[p % C], b = shift.data()[p % C];
    for (std::int64_t i = 0; i < HW; ++i) {
      const T xh = static_cast<T>((src[i] - m) * is);
      xhat[p * HW + i] = xh;
      out[p * HW + i] = g * xh + b;
    }
  }
  auto xi = input.impl(), gi = gain.impl(), bi = shift.impl();
  return detail::make_result<T>(
      "instance_norm", s, std::move(out), {xi, gi, bi},
      [xi, gi, bi, N, C, HW, xhat = std::move(xhat), inv_std = std::move(inv_std)](const detail::TensorImpl<T>& o) {
        for (std::int64_t p = 0; p < N * C; ++p) {
          const std::int64_t c = p % C;
          const T* dy = o.grad.data() + p * HW;
          const T* xh = xhat.data() + p * HW;
          double sum_dy = 0.0, sum_dy_xh = 0.0;
          for (std::int64_t i = 0; i < HW; ++i) {
            sum_dy += dy[i];
            sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
          }
          if (gi->requires_grad) gi->grad_buffer()[c] += static_cast<T>(sum_dy_xh);
          if (bi->requires_grad) bi->grad_buffer()[c] += static_cast<T>(sum_dy);
          if (xi->requires_grad) {
            const double g = gi->data[c];
            const double mean_d = g * sum_dy / static_cast<double>(HW);
            const double mean_dx = g * sum_dy_xh / static_cast<double>(HW);
            T* gx = xi->grad_buffer().data() + p * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
              gx[i] += static_cast<T>(inv_std[p] * (g * dy[i] - mean_d - xh[i] * mean_dx));
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, Activation kind) {
  const auto x = input.data();
  std::vector<T> out(x.size());
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : static_cast<T>(kLeakySlope) * x[i];
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
      break;
  }
  auto xi = input.impl();
  return unary<T>("activation", input, std::move(out), [xi, kind](const detail::TensorImpl<T>& o, std::vector<T>& gx) {
    const auto& xv = xi->data;
    const auto& y = o.data;
    const auto& g = o.grad;
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > T(0) ? g[i] : T(0);
        break;
      case Activation::leaky_relu:
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > T(0) ? g[i] : static_cast<T>(kLeakySlope) * g[i];
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
        break;
    }
  });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result<T>("add", a.shape(), std::move(out), {ai, bi}, [ai, bi](const detail::TensorImpl<T>& o) {
    if (ai->requires_grad) ai->accumulate_grad(o.grad);
    if (bi->requires_grad) bi->accumulate_grad(o.grad);
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result<T>("sub", a.shape(), std::move(out), {ai, bi}, [ai, bi](const detail::TensorImpl<T>& o) {
    if (ai->requires_grad) ai->accumulate_grad(o.grad);
    if (bi->requires_grad) {
      auto& gb = bi->grad_buffer();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result<T>("mul", a.shape(), std::move(out), {ai, bi}, [ai, bi](const detail::TensorImpl<T>& o) {
    if (ai->requires_grad) {
      auto& ga = ai->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      auto& gb = bi->grad_buffer();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * ai->data[i];
    }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, double factor) {
  const T f = static_cast<T>(factor);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f * a.data()[i];
  return unary<T>("scale", a, std::move(out), [f](const detail::TensorImpl<T>& o, std::vector<T>& gx) {
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += f * o.grad[i];
  });
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 4, "concat_channels");
  require_rank(b.shape(), 4, "concat_channels");
  const auto &sa = a.shape(), &sb = b.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw DimensionError("concat_channels: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::int64_t N = sa[0], ca = sa[1], cb = sb[1], HW = sa[2] * sa[3];
  std::vector<T> out(static_cast<std::size_t>(N * (ca + cb) * HW));
  for (std::int64_t n = 0; n < N; ++n) {
    std::copy_n(a.data().data() + n * ca * HW, ca * HW, out.data() + n * (ca + cb) * HW);
    std::copy_n(b.data().data() + n * cb * HW, cb * HW, out.data() + (n * (ca + cb) + ca) * HW);
  }
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result<T>(
      "concat_channels", Shape{N, ca + cb, sa[2], sa[3]}, std::move(out), {ai, bi},
      [ai, bi, N, ca, cb, HW](const detail::TensorImpl<T>& o) {
        for (std::int64_t n = 0; n < N; ++n) {
          const T* g = o.grad.data() + n * (ca + cb) * HW;
          if (ai->requires_grad) {
            T* ga = ai->grad_buffer().data() + n * ca * HW;
            for (std::int64_t i = 0; i < ca * HW; ++i) ga[i] += g[i];
          }
          if (bi->requires_grad) {
            T* gb = bi->grad_buffer().data() + n * cb * HW;
            for (std::int64_t i = 0; i < cb * HW; ++i) gb[i] += g[ca * HW + i];
          }
        }
      });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += v;
  return unary<T>(
      "sum", a, {static_cast<T>(acc)},
      [](const detail::TensorImpl<T>& o, std::vector<T>& gx) {
        for (auto& g : gx) g += o.grad[0];
      },
      Shape{});
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += v;
  const double n = static_cast<double>(a.numel());
  auto xi = a.impl();
  return detail::make_result<T>("mean", Shape{}, {static_cast<T>(acc / n)}, {xi},
                                [xi, n](const detail::TensorImpl<T>& o) {
                                  if (!xi->requires_grad) return;
                                  const T g = static_cast<T>(o.grad[0] / n);
                                  for (auto& v : xi->grad_buffer()) v += g;
                                });
}

template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  const double n = static_cast<double>(a.numel());
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result<T>("l1_loss", Shape{}, {static_cast<T>(acc / n)}, {ai, bi},
                                [ai, bi, n](const detail::TensorImpl<T>& o) {
                                  const T g = static_cast<T>(o.grad[0] / n);
                                  for (std::size_t i = 0; i < ai->data.size(); ++i) {
                                    const T d = ai->data[i] - bi->data[i];
                                    const T sg = d > T(0) ? g : (d < T(0) ? -g : T(0));
                                    if (ai->requires_grad) ai->grad_buffer()[i] += sg;
                                    if (bi->requires_grad) bi->grad_buffer()[i] -= sg;
                                  }
                                });
}

template <typename T>
BasicTensor<T> gan_bce(const BasicTensor<T>& logits, bool target_is_real) {
  const double t = target_is_real ? 1.0 : 0.0;
  double acc = 0.0;
  for (T zv : logits.data()) {
    const double z = zv;
    acc += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  const double n = static_cast<double>(logits.numel());
  auto zi = logits.impl();
  return detail::make_result<T>("gan_bce", Shape{}, {static_cast<T>(acc / n)}, {zi},
                                [zi, n, t](const detail::TensorImpl<T>& o) {
                                  if (!zi->requires_grad) return;
                                  auto& gz = zi->grad_buffer();
                                  const double g = o.grad[0] / n;
                                  for (std::size_t i = 0; i < gz.size(); ++i) {
                                    const double z = zi->data[i];
                                    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                                    gz[i] += static_cast<T>(g * (s - t));
                                  }
                                });
}

#define ADN_INSTANTIATE_OPS(T)                                                                                \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int, int, \
                                 PadMode);                                                                    \
  template BasicTensor<T> nearest_upsample(const BasicTensor<T>&, int);                                       \
  template BasicTensor<T> avg_pool2d(const BasicTensor<T>&, int);                                             \
  template BasicTensor<T> instance_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                        double);                                                              \
  template BasicTensor<T> activation(const BasicTensor<T>&, Activation);                                      \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                               \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                         \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> l1_loss(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> gan_bce(const BasicTensor<T>&, bool);

ADN_INSTANTIATE_OPS(float)
ADN_INSTANTIATE_OPS(double)

#undef ADN_INSTANTIATE_OPS

}  // namespace adn
