// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_TENSOR_HPP
#define SNP_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace snp {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major float32 array. Slicing and reshaping copy; there are no
/// strided views.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor identity(std::size_t n);
  static Tensor full(Shape shape, float value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 helpers.
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<float> row(std::size_t r);
  std::span<const float> row(std::size_t r) const;

  Tensor reshaped(Shape shape) const;

  // Bitwise comparison of the payload (distinguishes -0.0 and NaN payloads).
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// c = a · b, with a [M×K] and b [K×P]. Sums are accumulated in double.
Tensor matmul(const Tensor& a, const Tensor& b);

// c = a · bᵀ, with a [M×K] and b [P×K].
Tensor matmul_transposed(const Tensor& a, const Tensor& b);

// y = x · wᵀ + bias, with x [N×in], w [out×in], bias [out] (may be empty).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor transpose(const Tensor& a);

Tensor softmax_rows(const Tensor& a);

/// Layer normalization over the channels listed in `active` (sorted,
/// unique). Channels outside the set are written as 0. Throws
/// InvalidPlanError if `active` is empty.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::span<const std::size_t> active);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Exact GELU, 0.5·x·(1 + erf(x/√2)).
Tensor gelu(const Tensor& x);

void add_inplace(Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, float factor);

bool all_finite(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);

// Copy of `a` keeping only `keep` indices along `axis` (rank 1 or 2).
Tensor take(const Tensor& a, std::size_t axis, std::span<const std::size_t> keep);

}  // namespace snp

#endif  // SNP_TENSOR_HPP
