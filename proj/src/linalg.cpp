// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snp/errors.hpp"

namespace snp {

namespace {

constexpr double kRotationTol = 1e-12;
constexpr int kMaxSweeps = 60;

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Fills columns flagged in `missing` with unit vectors orthogonal to every
// other column (modified Gram-Schmidt against the standard basis).
void complete_basis(std::vector<double>& q, std::size_t n, const std::vector<bool>& missing) {
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!missing[j]) continue;
    double* col = q.data() + j * n;
    for (; candidate < n; ++candidate) {
      std::fill(col, col + n, 0.0);
      col[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < n; ++k) {
          if (k == j || (missing[k] && k > j)) continue;
          const double* other = q.data() + k * n;
          const double proj = dot(col, other, n);
          for (std::size_t i = 0; i < n; ++i) col[i] -= proj * other[i];
        }
      }
      const double norm = std::sqrt(dot(col, col, n));
      if (norm > 1e-6) {
        for (std::size_t i = 0; i < n; ++i) col[i] /= norm;
        ++candidate;
        break;
      }
    }
  }
}

}  // namespace

SvdResult64 svd64(std::span<const double> row_major, std::size_t n) {
  if (n == 0 || row_major.size() != n * n) {
    throw DimensionError("svd expects a non-empty square matrix");
  }
  // Work on columns of A (column-major copy); V accumulates the rotations.
  std::vector<double> w(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) w[c * n + r] = row_major[r * n + c];
  }
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      double* wp = w.data() + p * n;
      double* vp = v.data() + p * n;
      for (std::size_t q = p + 1; q < n; ++q) {
        double* wq = w.data() + q * n;
        double* vq = v.data() + q * n;
        const double alpha = dot(wp, wp, n);
        const double beta = dot(wq, wq, n);
        const double gamma = dot(wp, wq, n);
        if (gamma == 0.0 || std::abs(gamma) <= kRotationTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double a = wp[i], b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i], b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(w.data() + j * n, w.data() + j * n, n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  SvdResult64 out;
  out.n = n;
  out.s.resize(n);
  out.u.assign(n * n, 0.0);
  out.v.assign(n * n, 0.0);
  const double largest = norms[order[0]];
  const double null_tol = std::max(largest * 1e-14, 1e-300);
  std::vector<bool> missing(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.s[j] = norms[src];
    std::copy_n(v.data() + src * n, n, out.v.data() + j * n);
    if (norms[src] > null_tol) {
      for (std::size_t i = 0; i < n; ++i) out.u[j * n + i] = w[src * n + i] / norms[src];
    } else {
      missing[j] = true;
    }
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end()) {
    complete_basis(out.u, n, missing);
  }

  for (std::size_t j = 0; j < n; ++j) {
    double* uj = out.u.data() + j * n;
    double* vj = out.v.data() + j * n;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(uj[i]) > std::abs(uj[arg])) arg = i;
    }
    if (uj[arg] < 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        uj[i] = -uj[i];
        vj[i] = -vj[i];
      }
    }
  }
  return out;
}

SvdResult svd(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw DimensionError("svd expects a square matrix, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.rows();
  std::vector<double> buf(a.data().begin(), a.data().end());
  SvdResult64 r = svd64(buf, n);
  SvdResult out{Tensor({n, n}), std::vector<float>(n), Tensor({n, n})};
  for (std::size_t j = 0; j < n; ++j) {
    out.s[j] = static_cast<float>(r.s[j]);
    for (std::size_t i = 0; i < n; ++i) {
      out.u(i, j) = static_cast<float>(r.u[j * n + i]);
      out.v(i, j) = static_cast<float>(r.v[j * n + i]);
    }
  }
  return out;
}

double cosine_flat(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_flat length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(ab / (na * nb), -1.0, 1.0);
}

double cosine_flat(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("cosine_flat shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  return cosine_flat(a.data(), b.data());
}

Tensor rank1(float sigma, std::span<const float> u, std::span<const float> v) {
  if (u.empty() || v.empty()) throw DimensionError("rank1 expects non-empty vectors");
  Tensor out({u.size(), v.size()});
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double su = static_cast<double>(sigma) * u[i];
    for (std::size_t j = 0; j < v.size(); ++j) out(i, j) = static_cast<float>(su * v[j]);
  }
  return out;
}

std::vector<float> column(const Tensor& a, std::size_t j) {
  std::vector<float> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = a(i, j);
  return out;
}

}  // namespace snp
