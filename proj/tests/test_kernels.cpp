#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>

#include "weedctx/kernels.hpp"
#include "weedctx/random.hpp"

using namespace weedctx;
namespace k = weedctx::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], tol * (1.0 + std::abs(b[i]))) << "index " << i;
  }
}

}  // namespace

TEST(Kernels, ConvForwardMatchesReference) {
  const k::ConvShape s{3, 7, 5, 4, 6};
  const auto in = randn(s.in_size(), 1), w = randn(s.weight_size(), 2), b = randn(6, 3);
  std::vector<double> a(s.out_size()), r(s.out_size());
  k::conv3x3_forward<double>(s, in, w, b, a);
  k::reference::conv3x3_forward<double>(s, in, w, b, r);
  expect_close(a, r);
}

TEST(Kernels, ConvBackwardMatchesReference) {
  const k::ConvShape s{3, 6, 7, 3, 5};
  const auto in = randn(s.in_size(), 4), w = randn(s.weight_size(), 5), dout = randn(s.out_size(), 6);
  std::vector<double> din_a(s.in_size()), dw_a(s.weight_size()), db_a(5);
  std::vector<double> din_r(s.in_size()), dw_r(s.weight_size()), db_r(5);
  k::conv3x3_backward<double>(s, in, w, dout, din_a, dw_a, db_a);
  k::reference::conv3x3_backward<double>(s, in, w, dout, din_r, dw_r, db_r);
  expect_close(din_a, din_r);
  expect_close(dw_a, dw_r);
  expect_close(db_a, db_r);

  // Without an input gradient the parameter gradients are unchanged.
  std::vector<double> dw_b(s.weight_size()), db_b(5);
  k::conv3x3_backward<double>(s, in, w, dout, {}, dw_b, db_b);
  EXPECT_EQ(dw_a, dw_b);
  EXPECT_EQ(db_a, db_b);
}

TEST(Kernels, ConvSinglePixelByHand) {
  // 1x1 image: only the kernel center touches real data.
  const k::ConvShape s{1, 1, 1, 1, 1};
  std::vector<double> in{2.0}, w(9, 0.0), b{0.5}, out(1);
  w[4] = 3.0;
  w[0] = 100.0;
  k::conv3x3_forward<double>(s, in, w, b, out);
  EXPECT_DOUBLE_EQ(out[0], 6.5);
}

TEST(Kernels, PoolMatchesReferenceWithOddSizes) {
  const k::PoolShape s{2, 7, 5, 3};
  const auto in = randn(s.in_size(), 7);
  std::vector<double> a(s.out_size()), r(s.out_size());
  std::vector<std::int32_t> ia(s.out_size()), ir(s.out_size());
  k::maxpool2_forward<double>(s, in, a, ia);
  k::reference::maxpool2_forward<double>(s, in, r, ir);
  EXPECT_EQ(a, r);
  EXPECT_EQ(ia, ir);
  const auto dout = randn(s.out_size(), 8);
  std::vector<double> da(s.in_size()), dr(s.in_size());
  k::maxpool2_backward<double>(s, dout, ia, da);
  k::reference::maxpool2_backward<double>(s, dout, ir, dr);
  EXPECT_EQ(da, dr);
}

TEST(Kernels, PoolTiesPickFirst) {
  const k::PoolShape s{1, 2, 2, 1};
  std::vector<double> in{1, 1, 1, 1}, out(1);
  std::vector<std::int32_t> idx(1);
  k::maxpool2_forward<double>(s, in, out, idx);
  EXPECT_EQ(idx[0], 0);
}

TEST(Kernels, DenseMatchesReference) {
  const k::DenseShape s{5, 13, 4};
  const auto x = randn(65, 9), w = randn(52, 10), b = randn(4, 11), dy = randn(20, 12);
  std::vector<double> ya(20), yr(20);
  k::dense_forward<double>(s, x, w, b, ya);
  k::reference::dense_forward<double>(s, x, w, b, yr);
  expect_close(ya, yr);
  std::vector<double> dxa(65), dwa(52), dba(4), dxr(65), dwr(52), dbr(4);
  k::dense_backward<double>(s, x, w, dy, dxa, dwa, dba);
  k::reference::dense_backward<double>(s, x, w, dy, dxr, dwr, dbr);
  expect_close(dxa, dxr);
  expect_close(dwa, dwr);
  expect_close(dba, dbr);
}

TEST(Kernels, Relu) {
  std::vector<double> x{-1, 0, 2}, g{5, 5, 5};
  k::relu_forward<double>(x);
  EXPECT_EQ(x, (std::vector<double>{0, 0, 2}));
  k::relu_backward<double>(x, g);
  EXPECT_EQ(g, (std::vector<double>{0, 0, 5}));
}

TEST(Kernels, ThreadCountDoesNotChangeResults) {
  const k::ConvShape s{8, 9, 9, 3, 4};
  const auto in = randn(s.in_size(), 13), w = randn(s.weight_size(), 14), dout = randn(s.out_size(), 15);
  std::vector<double> dw1(s.weight_size()), db1(4), dw4(s.weight_size()), db4(4), out1(s.out_size()),
      out4(s.out_size());
  const auto b = randn(4, 16);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  k::conv3x3_forward<double>(s, in, w, b, out1);
  k::conv3x3_backward<double>(s, in, w, dout, {}, dw1, db1);
  omp_set_num_threads(4);
  k::conv3x3_forward<double>(s, in, w, b, out4);
  k::conv3x3_backward<double>(s, in, w, dout, {}, dw4, db4);
  omp_set_num_threads(saved);
  EXPECT_EQ(out1, out4);
  EXPECT_EQ(dw1, dw4);
  EXPECT_EQ(db1, db4);
}

TEST(Kernels, FloatInstantiation) {
  const k::ConvShape s{2, 4, 4, 2, 3};
  std::vector<float> in(s.in_size(), 0.5f), w(s.weight_size(), 0.25f), b(3, 0.0f), a(s.out_size()),
      r(s.out_size());
  k::conv3x3_forward<float>(s, in, w, b, a);
  k::reference::conv3x3_forward<float>(s, in, w, b, r);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], r[i], 1e-5f);
}
