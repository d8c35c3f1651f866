// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_PARALLEL_HPP
#define SNP_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace snp {

// Worker cap from SNP_THREADS (default 1, minimum 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must be
// independent; exceptions are rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace snp

#endif  // SNP_PARALLEL_HPP
