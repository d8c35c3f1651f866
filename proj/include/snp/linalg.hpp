// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_LINALG_HPP
#define SNP_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "snp/tensor.hpp"

namespace snp {

/// Full SVD of a square matrix, A = U·diag(s)·Vᵀ.
///
/// Singular vectors are stored as columns of `u` and `v`. Values in `s` are
/// non-increasing. Each left singular vector is sign-normalized so that its
/// largest-magnitude entry is positive (the matching right vector flips with
/// it), which makes the decomposition reproducible bit for bit.
struct SvdResult {
  Tensor u;
  std::vector<float> s;
  Tensor v;
};

/// Double-precision variant used internally by the importance scoring.
/// `u` and `v` are column-major N×N (column j is contiguous at j·N).
struct SvdResult64 {
  std::size_t n = 0;
  std::vector<double> u;
  std::vector<double> s;
  std::vector<double> v;

  std::span<const double> u_col(std::size_t j) const { return {u.data() + j * n, n}; }
  std::span<const double> v_col(std::size_t j) const { return {v.data() + j * n, n}; }
};

// One-sided (Hestenes) Jacobi SVD. Sweeps until every pair's normalized
// off-diagonal product drops below 1e-12, or 60 sweeps.
SvdResult svd(const Tensor& a);
SvdResult64 svd64(std::span<const double> row_major, std::size_t n);

/// Cosine between two same-shaped tensors viewed as flat vectors. Returns 0
/// when either Frobenius norm is below 1e-12.
double cosine_flat(const Tensor& a, const Tensor& b);
double cosine_flat(std::span<const float> a, std::span<const float> b);

// sigma · u · vᵀ
Tensor rank1(float sigma, std::span<const float> u, std::span<const float> v);

// Column j of a rank-2 tensor, copied.
std::vector<float> column(const Tensor& a, std::size_t j);

}  // namespace snp

#endif  // SNP_LINALG_HPP
