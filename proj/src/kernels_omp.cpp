#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "weedctx/kernels.hpp"

namespace weedctx::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One sample's 3x3 patches as rows: col[(y*w + x)][(ky*3 + kx)*cin + ci].
template <typename T>
void im2col(const T* in, int h, int w, int cin, T* col) {
  const int k = 9 * cin;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T* row = col + (static_cast<std::size_t>(y) * w + x) * k;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          T* dst = row + (ky * 3 + kx) * cin;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            std::fill(dst, dst + cin, T(0));
          } else {
            const T* src = in + (static_cast<std::size_t>(sy) * w + sx) * cin;
            std::copy(src, src + cin, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int h, int w, int cin, T* din) {
  const int k = 9 * cin;
  std::fill(din, din + static_cast<std::size_t>(h) * w * cin, T(0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T* row = col + (static_cast<std::size_t>(y) * w + x) * k;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= w) continue;
          const T* src = row + (ky * 3 + kx) * cin;
          T* dst = din + (static_cast<std::size_t>(sy) * w + sx) * cin;
          for (int ci = 0; ci < cin; ++ci) {
            dst[ci] += src[ci];
          }
        }
      }
    }
  }
}

// dst[e] = sum over s of parts[s * count + e], in sample order.
template <typename T>
void ordered_sum(const std::vector<T>& parts, int n, std::size_t count, T* dst) {
  const long long total = static_cast<long long>(count);
#pragma omp parallel for schedule(static)
  for (long long e = 0; e < total; ++e) {
    T acc = 0;
    for (int s = 0; s < n; ++s) {
      acc += parts[static_cast<std::size_t>(s) * count + e];
    }
    dst[e] = acc;
  }
}

}  // namespace

template <typename T>
void conv3x3_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                     std::span<const T> bias, std::span<T> out) {
  const int hw = s.h * s.w;
  const int k = 9 * s.cin;
  const Eigen::Map<const RowMat<T>> wm(weight.data(), k, s.cout);
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(bias.data(), s.cout);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(hw) * k);
#pragma omp for schedule(static)
    for (int n = 0; n < s.n; ++n) {
      im2col(in.data() + static_cast<std::size_t>(n) * hw * s.cin, s.h, s.w, s.cin, col.data());
      const Eigen::Map<const RowMat<T>> cm(col.data(), hw, k);
      Eigen::Map<RowMat<T>> om(out.data() + static_cast<std::size_t>(n) * hw * s.cout, hw, s.cout);
      om.noalias() = cm * wm;
      om.rowwise() += bm;
    }
  }
}

template <typename T>
void conv3x3_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight,
                      std::span<const T> dout, std::span<T> din, std::span<T> dweight, std::span<T> dbias) {
  const int hw = s.h * s.w;
  const int k = 9 * s.cin;
  const std::size_t wcount = s.weight_size();
  std::vector<T> wparts(static_cast<std::size_t>(s.n) * wcount);
  std::vector<T> bparts(static_cast<std::size_t>(s.n) * s.cout);
  const Eigen::Map<const RowMat<T>> wm(weight.data(), k, s.cout);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(hw) * k);
    std::vector<T> dcol(din.empty() ? 0 : static_cast<std::size_t>(hw) * k);
#pragma omp for schedule(static)
    for (int n = 0; n < s.n; ++n) {
      im2col(in.data() + static_cast<std::size_t>(n) * hw * s.cin, s.h, s.w, s.cin, col.data());
      const Eigen::Map<const RowMat<T>> cm(col.data(), hw, k);
      const Eigen::Map<const RowMat<T>> dm(dout.data() + static_cast<std::size_t>(n) * hw * s.cout, hw, s.cout);
      Eigen::Map<RowMat<T>> dw(wparts.data() + static_cast<std::size_t>(n) * wcount, k, s.cout);
      dw.noalias() = cm.transpose() * dm;
      // Explicit row order: Eigen's colwise redux peels by runtime alignment.
      T* db = bparts.data() + static_cast<std::size_t>(n) * s.cout;
      std::fill(db, db + s.cout, T(0));
      const T* drow = dout.data() + static_cast<std::size_t>(n) * hw * s.cout;
      for (int p = 0; p < hw; ++p) {
        for (int c = 0; c < s.cout; ++c) db[c] += drow[static_cast<std::size_t>(p) * s.cout + c];
      }
      if (!din.empty()) {
        Eigen::Map<RowMat<T>> dc(dcol.data(), hw, k);
        dc.noalias() = dm * wm.transpose();
        col2im_add(dcol.data(), s.h, s.w, s.cin, din.data() + static_cast<std::size_t>(n) * hw * s.cin);
      }
    }
  }
  ordered_sum(wparts, s.n, wcount, dweight.data());
  ordered_sum(bparts, s.n, static_cast<std::size_t>(s.cout), dbias.data());
}

template <typename T>
void relu_forward(std::span<T> x) {
  const long long n = static_cast<long long>(x.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    x[i] = x[i] > T(0) ? x[i] : T(0);
  }
}

template <typename T>
void relu_backward(std::span<const T> activation, std::span<T> grad) {
  const long long n = static_cast<long long>(grad.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    if (!(activation[i] > T(0))) grad[i] = T(0);
  }
}

template <typename T>
void maxpool2_forward(const PoolShape& s, std::span<const T> in, std::span<T> out, std::span<std::int32_t> argmax) {
  const int oh = s.out_h(), ow = s.out_w();
  const std::size_t row = static_cast<std::size_t>(s.w) * s.c;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const std::size_t o = ((static_cast<std::size_t>(n) * oh + y) * ow + x) * s.c;
        // Window corners in scan order; ties keep the earliest.
        const std::size_t i00 = ((static_cast<std::size_t>(n) * s.h + 2 * y) * s.w + 2 * x) * s.c;
        const std::size_t corner[4] = {i00, i00 + s.c, i00 + row, i00 + row + s.c};
        for (int c = 0; c < s.c; ++c) {
          std::size_t best = corner[0] + c;
          T best_v = in[best];
          for (int k = 1; k < 4; ++k) {
            const std::size_t i = corner[k] + c;
            if (in[i] > best_v) {
              best = i;
              best_v = in[i];
            }
          }
          out[o + c] = best_v;
          argmax[o + c] = static_cast<std::int32_t>(best);
        }
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const PoolShape& s, std::span<const T> dout, std::span<const std::int32_t> argmax,
                       std::span<T> din) {
  const std::size_t per_in = static_cast<std::size_t>(s.h) * s.w * s.c;
  const std::size_t per_out = static_cast<std::size_t>(s.out_h()) * s.out_w() * s.c;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < s.n; ++n) {
    std::fill(din.begin() + n * per_in, din.begin() + (n + 1) * per_in, T(0));
    for (std::size_t o = n * per_out; o < (n + 1) * per_out; ++o) {
      din[argmax[o]] += dout[o];
    }
  }
}

template <typename T>
void dense_forward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                   std::span<T> y) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < s.n; ++n) {
    T* yn = y.data() + static_cast<std::size_t>(n) * s.out;
    const T* xn = x.data() + static_cast<std::size_t>(n) * s.in;
    std::copy(bias.begin(), bias.end(), yn);
    for (int i = 0; i < s.in; ++i) {
      const T xi = xn[i];
      if (xi == T(0)) continue;
      const T* wi = weight.data() + static_cast<std::size_t>(i) * s.out;
      for (int j = 0; j < s.out; ++j) {
        yn[j] += xi * wi[j];
      }
    }
  }
}

template <typename T>
void dense_backward(const DenseShape& s, std::span<const T> x, std::span<const T> weight, std::span<const T> dy,
                    std::span<T> dx, std::span<T> dweight, std::span<T> dbias) {
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < s.n; ++n) {
      const T* dyn = dy.data() + static_cast<std::size_t>(n) * s.out;
      T* dxn = dx.data() + static_cast<std::size_t>(n) * s.in;
      for (int i = 0; i < s.in; ++i) {
        const T* wi = weight.data() + static_cast<std::size_t>(i) * s.out;
        T acc = 0;
        for (int j = 0; j < s.out; ++j) {
          acc += dyn[j] * wi[j];
        }
        dxn[i] = acc;
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < s.in; ++i) {
    T* dwi = dweight.data() + static_cast<std::size_t>(i) * s.out;
    std::fill(dwi, dwi + s.out, T(0));
    for (int n = 0; n < s.n; ++n) {
      const T xi = x[static_cast<std::size_t>(n) * s.in + i];
      if (xi == T(0)) continue;
      const T* dyn = dy.data() + static_cast<std::size_t>(n) * s.out;
      for (int j = 0; j < s.out; ++j) {
        dwi[j] += xi * dyn[j];
      }
    }
  }
  for (int j = 0; j < s.out; ++j) {
    T acc = 0;
    for (int n = 0; n < s.n; ++n) {
      acc += dy[static_cast<std::size_t>(n) * s.out + j];
    }
    dbias[j] = acc;
  }
}

#define WEEDCTX_INSTANTIATE(T)                                                                                   \
  template void conv3x3_forward<T>(const ConvShape&, std::span<const T>, std::span<const T>, std::span<const T>, \
                                   std::span<T>);                                                                \
  template void conv3x3_backward<T>(const ConvShape&, std::span<const T>, std::span<const T>,                    \
                                    std::span<const T>, std::span<T>, std::span<T>, std::span<T>);               \
  template void relu_forward<T>(std::span<T>);                                                                   \
  template void relu_backward<T>(std::span<const T>, std::span<T>);                                              \
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

}  // namespace weedctx::kernels
