// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "kernels.hpp"
#include "snp/errors.hpp"

namespace snp {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0f) {
  for (std::size_t extent : shape_) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t extent : shape_) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape_));
  }
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0f;
  return t;
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::span<float> Tensor::row(std::size_t r) {
  const std::size_t width = shape_.at(1);
  return std::span<float>(data_).subspan(r * width, width);
}

std::span<const float> Tensor::row(std::size_t r) const {
  const std::size_t width = shape_.at(1);
  return std::span<const float>(data_).subspan(r * width, width);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::bit_equal(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

namespace {

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a rank-2 tensor, got " + shape_str(t.shape()));
  }
}

// c[m,p] = Σ_k a[m,k]·b[p,k] (+ bias[p]).
void gemm_nt(const float* a, const float* b, const float* bias, float* c, std::size_t rows_a,
             std::size_t inner, std::size_t rows_b) {
  constexpr std::size_t kRowBlock = 64;
  for (std::size_t p0 = 0; p0 < rows_b; p0 += kRowBlock) {
    const std::size_t p1 = std::min(rows_b, p0 + kRowBlock);
    std::size_t m = 0;
    for (; m + 2 <= rows_a; m += 2) {
      const float* ar[2] = {a + m * inner, a + (m + 1) * inner};
      std::size_t p = p0;
      for (; p + 4 <= p1; p += 4) {
        const float* br[4] = {b + p * inner, b + (p + 1) * inner, b + (p + 2) * inner,
                              b + (p + 3) * inner};
        double out[8];
        kernels::dot_block<2, 4>(ar, br, inner, out);
        for (int r = 0; r < 2; ++r) {
          for (int l = 0; l < 4; ++l) {
            double v = out[r * 4 + l];
            if (bias) v += bias[p + l];
            c[(m + r) * rows_b + p + l] = static_cast<float>(v);
          }
        }
      }
      for (; p < p1; ++p) {
        for (int r = 0; r < 2; ++r) {
          double v = kernels::dot1(ar[r], b + p * inner, inner);
          if (bias) v += bias[p];
          c[(m + r) * rows_b + p] = static_cast<float>(v);
        }
      }
    }
    for (; m < rows_a; ++m) {
      const float* ar = a + m * inner;
      float* cr = c + m * rows_b;
      std::size_t p = p0;
      for (; p + 4 <= p1; p += 4) {
        double out[4];
        kernels::dot4(ar, b + p * inner, b + (p + 1) * inner, b + (p + 2) * inner, b + (p + 3) * inner,
                      inner, out);
        for (int l = 0; l < 4; ++l) {
          if (bias) out[l] += bias[p + l];
          cr[p + l] = static_cast<float>(out[l]);
        }
      }
      for (; p < p1; ++p) {
        double v = kernels::dot1(ar, b + p * inner, inner);
        if (bias) v += bias[p];
        cr[p] = static_cast<float>(v);
      }
    }
  }
}

}  // namespace

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  return matmul_transposed(a, transpose(b));
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_transposed");
  require_rank2(b, "matmul_transposed");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_transposed shape mismatch: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
  }
  Tensor c({a.rows(), b.rows()});
  gemm_nt(a.data().data(), b.data().data(), nullptr, c.data().data(), a.rows(), a.cols(),
          b.rows());
  return c;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  if (x.cols() != w.cols()) {
    throw DimensionError("linear shape mismatch: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()));
  }
  if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != w.rows())) {
    throw DimensionError("linear bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(w.shape()));
  }
  Tensor y({x.rows(), w.rows()});
  gemm_nt(x.data().data(), w.data().data(), bias.empty() ? nullptr : bias.data().data(),
          y.data().data(), x.rows(), x.cols(), w.rows());
  return y;
}

Tensor softmax_rows(const Tensor& a) {
  require_rank2(a, "softmax_rows");
  Tensor out(a.shape());
  std::vector<double> tmp(a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      tmp[c] = std::exp(static_cast<double>(in[c]) - mx);
      sum += tmp[c];
    }
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = static_cast<float>(tmp[c] / sum);
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::span<const std::size_t> active) {
  require_rank2(x, "layer_norm");
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm parameters " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match input " + shape_str(x.shape()));
  }
  if (active.empty()) throw InvalidPlanError("layer_norm: empty active channel set");
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i] >= d || (i && active[i] <= active[i - 1])) {
      throw InvalidPlanError("layer_norm: active set must be strictly increasing within [0, " +
                             std::to_string(d) + ")");
    }
  }
  constexpr double kEps = 1e-6;
  Tensor out(x.shape());
  const double count = static_cast<double>(active.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    double mean = 0.0;
    for (std::size_t c : active) mean += in[c];
    mean /= count;
    double var = 0.0;
    for (std::size_t c : active) {
      const double dv = in[c] - mean;
      var += dv * dv;
    }
    var /= count;
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::size_t c : active) {
      o[c] = static_cast<float>((in[c] - mean) * inv * gamma[c] + beta[c]);
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_rank2(x, "layer_norm");
  std::vector<std::size_t> all(x.cols());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return layer_norm(x, gamma, beta, all);
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    o[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
  }
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " + " +
                         shape_str(b.shape()));
  }
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

Tensor scaled(const Tensor& a, float factor) {
  Tensor out = a;
  for (float& v : out.data()) v *= factor;
  return out;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](float v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (float v : a.data()) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

Tensor take(const Tensor& a, std::size_t axis, std::span<const std::size_t> keep) {
  if (axis >= a.rank() || a.rank() > 2) {
    throw DimensionError("take: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(a.shape()));
  }
  const std::size_t extent = a.dim(axis);
  for (std::size_t k : keep) {
    if (k >= extent) {
      throw DimensionError("take: index " + std::to_string(k) + " out of range for axis of " +
                           std::to_string(extent));
    }
  }
  Shape shape = a.shape();
  shape[axis] = keep.size();
  Tensor out(shape);
  if (a.rank() == 1) {
    for (std::size_t i = 0; i < keep.size(); ++i) out[i] = a[keep[i]];
  } else if (axis == 0) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
      auto src = a.row(keep[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
  } else {
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t i = 0; i < keep.size(); ++i) out(r, i) = a(r, keep[i]);
    }
  }
  return out;
}

}  // namespace snp
