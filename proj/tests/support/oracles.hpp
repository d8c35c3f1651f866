// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

// Test-only reference implementations. Everything here is plain double
// arithmetic written independently of the library kernels.

#ifndef SNP_TESTS_ORACLES_HPP
#define SNP_TESTS_ORACLES_HPP

#include <cstddef>
#include <vector>

#include "snp/model.hpp"

namespace oracle {

// Row-major dense matrix.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

Mat from_tensor(const snp::Tensor& t);
Mat multiply(const Mat& x, const Mat& y);
Mat transpose(const Mat& x);
double frobenius(const Mat& x);
double flat_cosine(const Mat& x, const Mat& y);  // 0 when either norm < 1e-12

// Classical cyclic Jacobi on a symmetric matrix. Eigenvalues descending,
// eigenvectors as columns.
void jacobi_eigen(const Mat& sym, std::vector<double>& values, Mat& vectors);

struct Head64 {
  Mat q, k, scores;
};

struct Forward64 {
  std::vector<double> logits;
  std::vector<std::vector<Head64>> heads;  // [block][head]
};

// Double-precision pre-norm ViT forward, LayerNorm over the active channels.
Forward64 forward64(const snp::ModelBundle& model, const snp::Tensor& image);

/// Σ_j |cos(scale·q_i k_iᵀ, A v_j v_jᵀ)| with A = scale·Q·Kᵀ, v_j from the
/// eigenvectors of AᵀA, for j below `rank`.
std::vector<double> qk_scores(const Mat& q, const Mat& k, double scale, std::size_t rank);

// Σ_{l≠i} (1 − |cos(row_i, row_l)|).
std::vector<double> diversity(const std::vector<std::vector<double>>& rows);

std::vector<std::vector<double>> rows_of(const snp::Tensor& w);

}  // namespace oracle

#endif  // SNP_TESTS_ORACLES_HPP
