#pragma once

// Layer kernels over NHWC batches. The top-level functions are the
// OpenMP-parallel versions used for training; `reference::` holds plain
// serial nested loops with the same contracts, kept for tests and benchmarks.
//
// Reductions across samples (weight and bias gradients) always sum samples in
// index order, so results do not depend on the thread count.

#include <cstdint>
#include <span>

namespace weedctx::kernels {

struct ConvShape {
  int n = 0;     // batch
  int h = 0;     // spatial height (preserved)
  int w = 0;     // spatial width (preserved)
  int cin = 0;
  int cout = 0;

  std::size_t in_size() const { return static_cast<std::size_t>(n) * h * w * cin; }
  std::size_t out_size() const { return static_cast<std::size_t>(n) * h * w * cout; }
  std::size_t weight_size() const { return static_cast<std::size_t>(9) * cin * cout; }
};

struct PoolShape {
  int n = 0;
  int h = 0;  // input height; output is h / 2 (floor)
  int w = 0;
  int c = 0;

  int out_h() const { return h / 2; }
  int out_w() const { return w / 2; }
  std::size_t in_size() const { return static_cast<std::size_t>(n) * h * w * c; }
  std::size_t out_size() const { return static_cast<std::size_t>(n) * out_h() * out_w() * c; }
};

struct DenseShape {
  int n = 0;
  int in = 0;
  int out = 0;
};

// 3x3, stride 1, zero "same" padding. Weights laid out [ky][kx][cin][cout].
template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out);

/// din may be empty (gradient w.r.t. the network input is not needed).
/// dweight and dbias are overwritten.
template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> dout, std::span<T> din, std::span<T> dweight, std::span<T> dbias);

template <typename T>
void relu_forward(std::span<T> x);

/// grad *= (activation > 0)
template <typename T>
void relu_backward(std::span<const T> activation, std::span<T> grad);

/// 2x2 stride-2 max pool with floor semantics. argmax stores the flat input
/// index of each selected element (first maximum in row-major window order).
template <typename T>
void maxpool2_forward(const PoolShape& s, std::span<const T> in, std::span<T> out, std::span<std::int32_t> argmax);

/// din is overwritten.
template <typename T>
void maxpool2_backward(const PoolShape& s, std::span<const T> dout, std::span<const std::int32_t> argmax,
                       std::span<T> din);

/// y = x W + b with W laid out [in][out].
template <typename T>
void dense_forward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                   std::span<T> y);

/// dx may be empty. dweight and dbias are overwritten.
template <typename T>
void dense_backward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dweight, std::span<T> dbias);

namespace reference {

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out);

template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> dout, std::span<T> din, std::span<T> dweight, std::span<T> dbias);

template <typename T>
void maxpool2_forward(const PoolShape& s, std::span<const T> in, std::span<T> out, std::span<std::int32_t> argmax);

template <typename T>
void maxpool2_backward(const PoolShape& s, std::span<const T> dout, std::span<const std::int32_t> argmax,
                       std::span<T> din);

template <typename T>
void dense_forward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                   std::span<T> y);

template <typename T>
void dense_backward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dweight, std::span<T> dbias);

}  // namespace reference

}  // namespace weedctx::kernels
