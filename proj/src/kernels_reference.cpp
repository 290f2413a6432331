#include <algorithm>

#include "weedctx/kernels.hpp"

namespace weedctx::kernels::reference {

namespace {

std::size_t nhwc(const ConvShape& s, int n, int y, int x, int c, int channels) {
  return ((static_cast<std::size_t>(n) * s.h + y) * s.w + x) * channels + c;
}

std::size_t widx(const ConvShape& s, int ky, int kx, int ci, int co) {
  return ((static_cast<std::size_t>(ky) * 3 + kx) * s.cin + ci) * s.cout + co;
}

}  // namespace

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out) {
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        for (int co = 0; co < s.cout; ++co) {
          T acc = bias[co];
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y + ky - 1, sx = x + kx - 1;
              if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
              for (int ci = 0; ci < s.cin; ++ci) {
                acc += in[nhwc(s, n, sy, sx, ci, s.cin)] * weight[widx(s, ky, kx, ci, co)];
              }
            }
          out[nhwc(s, n, y, x, co, s.cout)] = acc;
        }
}

template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> dout, std::span<T> din, std::span<T> dweight, std::span<T> dbias) {
  std::fill(dweight.begin(), dweight.end(), T(0));
  std::fill(dbias.begin(), dbias.end(), T(0));
  if (!din.empty()) std::fill(din.begin(), din.end(), T(0));
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        for (int co = 0; co < s.cout; ++co) {
          const T g = dout[nhwc(s, n, y, x, co, s.cout)];
          dbias[co] += g;
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y + ky - 1, sx = x + kx - 1;
              if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
              for (int ci = 0; ci < s.cin; ++ci) {
                dweight[widx(s, ky, kx, ci, co)] += g * in[nhwc(s, n, sy, sx, ci, s.cin)];
                if (!din.empty()) din[nhwc(s, n, sy, sx, ci, s.cin)] += g * weight[widx(s, ky, kx, ci, co)];
              }
            }
        }
}

template <typename T>
void maxpool2_forward(const PoolShape& s, std::span<const T> in, std::span<T> out, std::span<std::int32_t> argmax) {
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.out_h(); ++y)
      for (int x = 0; x < s.out_w(); ++x)
        for (int c = 0; c < s.c; ++c, ++o) {
          std::size_t best = ((static_cast<std::size_t>(n) * s.h + 2 * y) * s.w + 2 * x) * s.c + c;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i = ((static_cast<std::size_t>(n) * s.h + 2 * y + dy) * s.w + 2 * x + dx) * s.c + c;
              if (in[i] > in[best]) best = i;
            }
          out[o] = in[best];
          argmax[o] = static_cast<std::int32_t>(best);
        }
}

template <typename T>
void maxpool2_backward(const PoolShape& s, std::span<const T> dout, std::span<const std::int32_t> argmax,
                       std::span<T> din) {
  std::fill(din.begin(), din.end(), T(0));
  for (std::size_t o = 0; o < s.out_size(); ++o) {
    din[argmax[o]] += dout[o];
  }
}

template <typename T>
void dense_forward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                   std::span<T> y) {
  for (int n = 0; n < s.n; ++n)
    for (int j = 0; j < s.out; ++j) {
      T acc = bias[j];
      for (int i = 0; i < s.in; ++i) {
        acc += x[static_cast<std::size_t>(n) * s.in + i] * weight[static_cast<std::size_t>(i) * s.out + j];
      }
      y[static_cast<std::size_t>(n) * s.out + j] = acc;
    }
}

template <typename T>
void dense_backward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dweight, std::span<T> dbias) {
  std::fill(dweight.begin(), dweight.end(), T(0));
  std::fill(dbias.begin(), dbias.end(), T(0));
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), T(0));
  for (int n = 0; n < s.n; ++n)
    for (int j = 0; j < s.out; ++j) {
      const T g = dy[static_cast<std::size_t>(n) * s.out + j];
      dbias[j] += g;
      for (int i = 0; i < s.in; ++i) {
        dweight[static_cast<std::size_t>(i) * s.out + j] += g * x[static_cast<std::size_t>(n) * s.in + i];
        if (!dx.empty()) dx[static_cast<std::size_t>(n) * s.in + i] += g * weight[static_cast<std::size_t>(i) * s.out + j];
      }
    }
}

#define WEEDCTX_INSTANTIATE(T)                                                                                   \
  template void conv3x3_forward<T>(const ConvShape&, std::span<const T>, std::span<const T>, std::span<const T>, \
                                   std::span<T>);                                                                \
  template void conv3x3_backward<T>(const ConvShape&, std::span<const T>, std::span<const T>,                    \
                                    std::span<const T>, std::span<T>, std::span<T>, std::span<T>);               \
  template void maxpool2_forward<T>(const PoolShape&, std::span<const T>, std::span<T>,                          \
                                    std::span<std::int32_t>);                                                    \
  template void maxpool2_backward<T>(const PoolShape&, std::span<const T>, std::span<const std::int32_t>,        \
                                     std::span<T>);                                                              \
  template void dense_forward<T>(const DenseShape&, std::span<const T>, std::span<const T>, std::span<const T>,  \
                                 std::span<T>);                                                                  \
  template void dense_backward<T>(const DenseShape&, std::span<const T>, std::span<const T>, std::span<const T>, \
                                  std::span<T>, std::span<T>, std::span<T>);

WEEDCTX_INSTANTIATE(float)
WEEDCTX_INSTANTIATE(double)

#undef WEEDCTX_INSTANTIATE

}  // namespace weedctx::kernels::reference
