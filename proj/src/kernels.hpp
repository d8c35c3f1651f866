// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

// Internal dot-product kernels. Inputs are float32, sums are double in
// kLanes partial lanes, so the loops vectorize without reassociation flags.
// Every kernel reduces one output with the same lane layout, so a given
// dot product is bit-identical whichever kernel computes it.

#ifndef SNP_SRC_KERNELS_HPP
#define SNP_SRC_KERNELS_HPP

#include <cstddef>

namespace snp::kernels {

inline constexpr std::size_t kLanes = 8;

inline double reduce_lanes(const double* s) {
  return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
}

// R rows of a against C rows of b: out[r*C + c] = a_r·b_c.
template <int R, int C>
inline void dot_block(const float* const* a, const float* const* b, std::size_t n, double* out) {
  double s[R][C][kLanes] = {};
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      double x[R];
      for (int r = 0; r < R; ++r) x[r] = a[r][k + l];
      for (int c = 0; c < C; ++c) {
        const double y = b[c][k + l];
        for (int r = 0; r < R; ++r) s[r][c][l] += x[r] * y;
      }
    }
  }
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      double t = reduce_lanes(s[r][c]);
      for (std::size_t kk = k; kk < n; ++kk) t += static_cast<double>(a[r][kk]) * b[c][kk];
      out[r * C + c] = t;
    }
  }
}

inline void dot4(const float* a, const float* b0, const float* b1, const float* b2,
                 const float* b3, std::size_t n, double out[4]) {
  const float* as[1] = {a};
  const float* bs[4] = {b0, b1, b2, b3};
  dot_block<1, 4>(as, bs, n, out);
}

inline double dot1(const float* a, const float* b, std::size_t n) {
  double out;
  dot_block<1, 1>(&a, &b, n, &out);
  return out;
}

}  // namespace snp::kernels

#endif  // SNP_SRC_KERNELS_HPP
