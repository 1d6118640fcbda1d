#pragma once

#include <cstdint>
#include <vector>

namespace visrec::ops {

struct TensorShape {
  int n = 0, h = 0, w = 0, c = 0;
  int64_t count() const {
    return static_cast<int64_t>(n) * h * w * c;
  }
  int64_t per_sample() const { return static_cast<int64_t>(h) * w * c; }
  bool operator==(const TensorShape&) const = default;
};

// Layouts: activations NHWC, conv kernels [kh][kw][cin][cout],
// dense weights [units][in_dim]. Backward functions accumulate into their
// d_* outputs, which the caller zero-initializes.

TensorShape conv2d_out_shape(const TensorShape& in, int kernel, int stride,
                             int padding, int out_channels);

template <typename T>
void conv2d_forward(const T* in, const TensorShape& is, const T* kernel,
                    int kernel_size, int stride, int padding, int cout,
                    const T* bias, T* out);

template <typename T>
void conv2d_backward(const T* in, const TensorShape& is, const T* kernel,
                     int kernel_size, int stride, int padding, int cout,
                     const T* d_out, T* d_in, T* d_kernel, T* d_bias);

template <typename T>
void relu_forward(const T* in, int64_t n, T* out);

template <typename T>
void relu_backward(const T* in, const T* d_out, int64_t n, T* d_in);

TensorShape pool_out_shape(const TensorShape& in, int kernel, int stride);

// argmax records the winning input offset per output element (first maximum
// in row-major window scan order on ties).
template <typename T>
void maxpool_forward(const T* in, const TensorShape& is, int kernel,
                     int stride, T* out, int64_t* argmax);

template <typename T>
void maxpool_backward(const TensorShape& os, const int64_t* argmax,
                      const T* d_out, T* d_in);

template <typename T>
void global_avg_pool_forward(const T* in, const TensorShape& is, T* out);

template <typename T>
void global_avg_pool_backward(const TensorShape& is, const T* d_out, T* d_in);

template <typename T>
struct BnCache {
  std::vector<T> xhat;     // normalized activations, same shape as input
  std::vector<T> inv_std;  // per channel
};

// Train mode: normalize by batch statistics, optionally fold them into the
// running estimates (running <- momentum*running + (1-momentum)*batch).
template <typename T>
void batchnorm_forward_train(const T* in, const TensorShape& is,
                             const T* gamma, const T* beta, T* out,
                             BnCache<T>& cache, T* running_mean,
                             T* running_var, double momentum, double epsilon,
                             bool update_running);

template <typename T>
void batchnorm_forward_infer(const T* in, const TensorShape& is,
                             const T* gamma, const T* beta,
                             const T* running_mean, const T* running_var,
                             double epsilon, T* out);

template <typename T>
void batchnorm_backward(const TensorShape& is, const T* gamma,
                        const BnCache<T>& cache, const T* d_out, T* d_in,
                        T* d_gamma, T* d_beta);

template <typename T>
void dense_forward(const T* in, int n, int in_dim, const T* weights,
                   const T* bias, int units, T* out);

template <typename T>
void dense_backward(const T* in, int n, int in_dim, const T* weights,
                    int units, const T* d_out, T* d_in, T* d_weights,
                    T* d_bias);

// Numerically stable row-wise softmax: exp(z - max) / sum.
template <typename T>
void softmax_rows(const T* logits, int n, int k, T* probs);

}  // namespace visrec::ops
