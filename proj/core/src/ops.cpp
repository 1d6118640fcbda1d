#include "visrec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "visrec/errors.hpp"

namespace visrec::ops {

TensorShape conv2d_out_shape(const TensorShape& in, int kernel, int stride,
                             int padding, int out_channels) {
  int oh = (in.h + 2 * padding - kernel) / stride + 1;
  int ow = (in.w + 2 * padding - kernel) / stride + 1;
  if (oh < 1 || ow < 1) {
    throw ConfigError("conv output would be empty for input " +
                      std::to_string(in.h) + "x" + std::to_string(in.w));
  }
  return {in.n, oh, ow, out_channels};
}

template <typename T>
void conv2d_forward(const T* in, const TensorShape& is, const T* kernel,
                    int kernel_size, int stride, int padding, int cout,
                    const T* bias, T* out) {
  const TensorShape os = conv2d_out_shape(is, kernel_size, stride, padding,
                                          cout);
  const int H = is.h, W = is.w, C = is.c, K = kernel_size;
  for (int n = 0; n < is.n; ++n) {
    const T* in_n = in + static_cast<int64_t>(n) * is.per_sample();
    T* out_n = out + static_cast<int64_t>(n) * os.per_sample();
    for (int oy = 0; oy < os.h; ++oy) {
      const int iy0 = oy * stride - padding;
      const int ky_lo = std::max(0, -iy0);
      const int ky_hi = std::min(K, H - iy0);
      for (int ox = 0; ox < os.w; ++ox) {
        const int ix0 = ox * stride - padding;
        const int kx_lo = std::max(0, -ix0);
        const int kx_hi = std::min(K, W - ix0);
        T* op = out_n + (static_cast<int64_t>(oy) * os.w + ox) * cout;
        for (int co = 0; co < cout; ++co) op[co] = bias[co];
        for (int ky = ky_lo; ky < ky_hi; ++ky) {
          const T* in_px =
              in_n + ((static_cast<int64_t>(iy0 + ky) * W) + ix0 + kx_lo) * C;
          const T* k_px =
              kernel + ((static_cast<int64_t>(ky) * K + kx_lo) * C) * cout;
          for (int kx = kx_lo; kx < kx_hi; ++kx) {
            for (int ci = 0; ci < C; ++ci) {
              const T a = in_px[ci];
              const T* kp = k_px + static_cast<int64_t>(ci) * cout;
              for (int co = 0; co < cout; ++co) op[co] += a * kp[co];
            }
            in_px += C;
            k_px += static_cast<int64_t>(C) * cout;
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const T* in, const TensorShape& is, const T* kernel,
                     int kernel_size, int stride, int padding, int cout,
                     const T* d_out, T* d_in, T* d_kernel, T* d_bias) {
  const TensorShape os = conv2d_out_shape(is, kernel_size, stride, padding,
                                          cout);
  const int H = is.h, W = is.w, C = is.c, K = kernel_size;
  for (int n = 0; n < is.n; ++n) {
    const T* in_n = in + static_cast<int64_t>(n) * is.per_sample();
    T* d_in_n = d_in + static_cast<int64_t>(n) * is.per_sample();
    const T* d_out_n = d_out + static_cast<int64_t>(n) * os.per_sample();
    for (int oy = 0; oy < os.h; ++oy) {
      const int iy0 = oy * stride - padding;
      const int ky_lo = std::max(0, -iy0);
      const int ky_hi = std::min(K, H - iy0);
      for (int ox = 0; ox < os.w; ++ox) {
        const int ix0 = ox * stride - padding;
        const int kx_lo = std::max(0, -ix0);
        const int kx_hi = std::min(K, W - ix0);
        const T* dop = d_out_n + (static_cast<int64_t>(oy) * os.w + ox) * cout;
        for (int co = 0; co < cout; ++co) d_bias[co] += dop[co];
        for (int ky = ky_lo; ky < ky_hi; ++ky) {
          const int64_t px =
              (static_cast<int64_t>(iy0 + ky) * W) + ix0 + kx_lo;
          const T* in_px = in_n + px * C;
          T* d_in_px = d_in_n + px * C;
          const int64_t kbase = (static_cast<int64_t>(ky) * K + kx_lo) * C;
          const T* k_px = kernel + kbase * cout;
          T* d_k_px = d_kernel + kbase * cout;
          for (int kx = kx_lo; kx < kx_hi; ++kx) {
            for (int ci = 0; ci < C; ++ci) {
              const T a = in_px[ci];
              const T* kp = k_px + static_cast<int64_t>(ci) * cout;
              T* dkp = d_k_px + static_cast<int64_t>(ci) * cout;
              T acc = 0;
              for (int co = 0; co < cout; ++co) {
                const T g = dop[co];
                dkp[co] += a * g;
                acc += kp[co] * g;
              }
              d_in_px[ci] += acc;
            }
            in_px += C;
            d_in_px += C;
            k_px += static_cast<int64_t>(C) * cout;
            d_k_px += static_cast<int64_t>(C) * cout;
          }
        }
      }
    }
  }
}

template <typename T>
void relu_forward(const T* in, int64_t n, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward(const T* in, const T* d_out, int64_t n, T* d_in) {
  for (int64_t i = 0; i < n; ++i) d_in[i] += in[i] > T(0) ? d_out[i] : T(0);
}

TensorShape pool_out_shape(const TensorShape& in, int kernel, int stride) {
  int oh = (in.h - kernel) / stride + 1;
  int ow = (in.w - kernel) / stride + 1;
  if (oh < 1 || ow < 1) {
    throw ConfigError("maxpool output would be empty for input " +
                      std::to_string(in.h) + "x" + std::to_string(in.w));
  }
  return {in.n, oh, ow, in.c};
}

template <typename T>
void maxpool_forward(const T* in, const TensorShape& is, int kernel,
                     int stride, T* out, int64_t* argmax) {
  const TensorShape os = pool_out_shape(is, kernel, stride);
  const int C = is.c;
  for (int n = 0; n < is.n; ++n) {
    const int64_t in_base = static_cast<int64_t>(n) * is.per_sample();
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        T* op = out + ((static_cast<int64_t>(n) * os.h + oy) * os.w + ox) * C;
        int64_t* ap =
            argmax + ((static_cast<int64_t>(n) * os.h + oy) * os.w + ox) * C;
        for (int c = 0; c < C; ++c) {
          T best{};
          int64_t best_idx = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              int64_t idx = in_base +
                            ((static_cast<int64_t>(oy * stride + ky) * is.w) +
                             ox * stride + kx) *
                                C +
                            c;
              if (best_idx < 0 || in[idx] > best) {
                best = in[idx];
                best_idx = idx;
              }
            }
          }
          op[c] = best;
          ap[c] = best_idx;
        }
      }
    }
  }
}

template <typename T>
void maxpool_backward(const TensorShape& os, const int64_t* argmax,
                      const T* d_out, T* d_in) {
  const int64_t total = os.count();
  for (int64_t i = 0; i < total; ++i) d_in[argmax[i]] += d_out[i];
}

template <typename T>
void global_avg_pool_forward(const T* in, const TensorShape& is, T* out) {
  const int64_t hw = static_cast<int64_t>(is.h) * is.w;
  const int C = is.c;
  for (int n = 0; n < is.n; ++n) {
    const T* in_n = in + static_cast<int64_t>(n) * is.per_sample();
    T* out_n = out + static_cast<int64_t>(n) * C;
    std::vector<double> acc(static_cast<size_t>(C), 0.0);
    for (int64_t p = 0; p < hw; ++p) {
      const T* px = in_n + p * C;
      for (int c = 0; c < C; ++c) acc[static_cast<size_t>(c)] += px[c];
    }
    for (int c = 0; c < C; ++c) {
      out_n[c] = static_cast<T>(acc[static_cast<size_t>(c)] /
                                static_cast<double>(hw));
    }
  }
}

template <typename T>
void global_avg_pool_backward(const TensorShape& is, const T* d_out,
                              T* d_in) {
  const int64_t hw = static_cast<int64_t>(is.h) * is.w;
  const int C = is.c;
  const T scale = T(1) / static_cast<T>(hw);
  for (int n = 0; n < is.n; ++n) {
    const T* d_out_n = d_out + static_cast<int64_t>(n) * C;
    T* d_in_n = d_in + static_cast<int64_t>(n) * is.per_sample();
    for (int64_t p = 0; p < hw; ++p) {
      T* px = d_in_n + p * C;
      for (int c = 0; c < C; ++c) px[c] += d_out_n[c] * scale;
    }
  }
}

template <typename T>
void batchnorm_forward_train(const T* in, const TensorShape& is,
                             const T* gamma, const T* beta, T* out,
                             BnCache<T>& cache, T* running_mean,
                             T* running_var, double momentum, double epsilon,
                             bool update_running) {
  if (is.n < 2) {
    throw DataError("batchnorm: train mode requires batch size >= 2");
  }
  const int C = is.c;
  const int64_t m = is.count() / C;
  std::vector<double> sum(static_cast<size_t>(C), 0.0);
  std::vector<double> sumsq(static_cast<size_t>(C), 0.0);
  const int64_t total = is.count();
  for (int64_t i = 0; i < total; i += C) {
    for (int c = 0; c < C; ++c) {
      double v = in[i + c];
      sum[static_cast<size_t>(c)] += v;
      sumsq[static_cast<size_t>(c)] += v * v;
    }
  }
  cache.xhat.resize(static_cast<size_t>(total));
  cache.inv_std.resize(static_cast<size_t>(C));
  std::vector<T> mean_t(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    double mean = sum[static_cast<size_t>(c)] / static_cast<double>(m);
    double var = std::max(
        0.0, sumsq[static_cast<size_t>(c)] / static_cast<double>(m) -
                 mean * mean);
    mean_t[static_cast<size_t>(c)] = static_cast<T>(mean);
    cache.inv_std[static_cast<size_t>(c)] =
        static_cast<T>(1.0 / std::sqrt(var + epsilon));
    if (update_running) {
      running_mean[c] = static_cast<T>(momentum * running_mean[c] +
                                       (1.0 - momentum) * mean);
      running_var[c] = static_cast<T>(momentum * running_var[c] +
                                      (1.0 - momentum) * var);
    }
  }
  for (int64_t i = 0; i < total; i += C) {
    for (int c = 0; c < C; ++c) {
      T xh = (in[i + c] - mean_t[static_cast<size_t>(c)]) *
             cache.inv_std[static_cast<size_t>(c)];
      cache.xhat[static_cast<size_t>(i + c)] = xh;
      out[i + c] = gamma[c] * xh + beta[c];
    }
  }
}

template <typename T>
void batchnorm_forward_infer(const T* in, const TensorShape& is,
                             const T* gamma, const T* beta,
                             const T* running_mean, const T* running_var,
                             double epsilon, T* out) {
  const int C = is.c;
  std::vector<T> scale(static_cast<size_t>(C)), shift(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    T s = static_cast<T>(gamma[c] / std::sqrt(static_cast<double>(
                                        running_var[c]) + epsilon));
    scale[static_cast<size_t>(c)] = s;
    shift[static_cast<size_t>(c)] = beta[c] - s * running_mean[c];
  }
  const int64_t total = is.count();
  for (int64_t i = 0; i < total; i += C) {
    for (int c = 0; c < C; ++c) {
      out[i + c] = scale[static_cast<size_t>(c)] * in[i + c] +
                   shift[static_cast<size_t>(c)];
    }
  }
}

template <typename T>
void batchnorm_backward(const TensorShape& is, const T* gamma,
                        const BnCache<T>& cache, const T* d_out, T* d_in,
                        T* d_gamma, T* d_beta) {
  const int C = is.c;
  const int64_t m = is.count() / C;
  const int64_t total = is.count();
  std::vector<double> sum_dy(static_cast<size_t>(C), 0.0);
  std::vector<double> sum_dy_xhat(static_cast<size_t>(C), 0.0);
  for (int64_t i = 0; i < total; i += C) {
    for (int c = 0; c < C; ++c) {
      double g = d_out[i + c];
      sum_dy[static_cast<size_t>(c)] += g;
      sum_dy_xhat[static_cast<size_t>(c)] +=
          g * cache.xhat[static_cast<size_t>(i + c)];
    }
  }
  for (int c = 0; c < C; ++c) {
    d_gamma[c] += static_cast<T>(sum_dy_xhat[static_cast<size_t>(c)]);
    d_beta[c] += static_cast<T>(sum_dy[static_cast<size_t>(c)]);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (int64_t i = 0; i < total; i += C) {
    for (int c = 0; c < C; ++c) {
      double term = d_out[i + c] -
                    sum_dy[static_cast<size_t>(c)] * inv_m -
                    cache.xhat[static_cast<size_t>(i + c)] *
                        sum_dy_xhat[static_cast<size_t>(c)] * inv_m;
      d_in[i + c] += static_cast<T>(
          gamma[c] * cache.inv_std[static_cast<size_t>(c)] * term);
    }
  }
}

template <typename T>
void dense_forward(const T* in, int n, int in_dim, const T* weights,
                   const T* bias, int units, T* out) {
  for (int i = 0; i < n; ++i) {
    const T* x = in + static_cast<int64_t>(i) * in_dim;
    T* y = out + static_cast<int64_t>(i) * units;
    for (int u = 0; u < units; ++u) {
      const T* w = weights + static_cast<int64_t>(u) * in_dim;
      T acc = bias[u];
      for (int d = 0; d < in_dim; ++d) acc += w[d] * x[d];
      y[u] = acc;
    }
  }
}

template <typename T>
void dense_backward(const T* in, int n, int in_dim, const T* weights,
                    int units, const T* d_out, T* d_in, T* d_weights,
                    T* d_bias) {
  for (int i = 0; i < n; ++i) {
    const T* x = in + static_cast<int64_t>(i) * in_dim;
    T* dx = d_in + static_cast<int64_t>(i) * in_dim;
    const T* dy = d_out + static_cast<int64_t>(i) * units;
    for (int u = 0; u < units; ++u) {
      const T g = dy[u];
      d_bias[u] += g;
      const T* w = weights + static_cast<int64_t>(u) * in_dim;
      T* dw = d_weights + static_cast<int64_t>(u) * in_dim;
      for (int d = 0; d < in_dim; ++d) {
        dw[d] += g * x[d];
        dx[d] += g * w[d];
      }
    }
  }
}

template <typename T>
void softmax_rows(const T* logits, int n, int k, T* probs) {
  for (int i = 0; i < n; ++i) {
    const T* z = logits + static_cast<int64_t>(i) * k;
    T* p = probs + static_cast<int64_t>(i) * k;
    T mx = z[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      double e = std::exp(static_cast<double>(z[j] - mx));
      p[j] = static_cast<T>(e);
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < k; ++j) p[j] = static_cast<T>(p[j] * inv);
  }
}

#define VISREC_INSTANTIATE_OPS(T)                                             \
  template void conv2d_forward<T>(const T*, const TensorShape&, const T*,     \
                                  int, int, int, int, const T*, T*);          \
  template void conv2d_backward<T>(const T*, const TensorShape&, const T*,    \
                                   int, int, int, int, const T*, T*, T*, T*); \
  template void relu_forward<T>(const T*, int64_t, T*);                       \
  template void relu_backward<T>(const T*, const T*, int64_t, T*);            \
  template void maxpool_forward<T>(const T*, const TensorShape&, int, int,    \
                                   T*, int64_t*);                             \
  template void maxpool_backward<T>(const TensorShape&, const int64_t*,       \
                                    const T*, T*);                            \
  template void global_avg_pool_forward<T>(const T*, const TensorShape&, T*); \
  template void global_avg_pool_backward<T>(const TensorShape&, const T*,     \
                                            T*);                              \
  template void batchnorm_forward_train<T>(const T*, const TensorShape&,      \
                                           const T*, const T*, T*,            \
                                           BnCache<T>&, T*, T*, double,       \
                                           double, bool);                     \
  template void batchnorm_forward_infer<T>(const T*, const TensorShape&,      \
                                           const T*, const T*, const T*,      \
                                           const T*, double, T*);             \
  template void batchnorm_backward<T>(const TensorShape&, const T*,           \
                                      const BnCache<T>&, const T*, T*, T*,    \
                                      T*);                                    \
  template void dense_forward<T>(const T*, int, int, const T*, const T*,      \
                                 int, T*);                                    \
  template void dense_backward<T>(const T*, int, int, const T*, int,          \
                                  const T*, T*, T*, T*);                      \
  template void softmax_rows<T>(const T*, int, int, T*);

VISREC_INSTANTIATE_OPS(float)
VISREC_INSTANTIATE_OPS(double)

#undef VISREC_INSTANTIATE_OPS

}  // namespace visrec::ops
