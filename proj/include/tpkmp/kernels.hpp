#pragma once

// Hot loops with a plain serial version and an OpenMP version. The serial
// versions are the reference the parallel ones are tested against.

#include <span>

#include "tpkmp/gmm.hpp"
#include "tpkmp/kernel.hpp"
#include "tpkmp/linalg.hpp"

namespace tpkmp::kernels {

/// Scalar Gram matrix G(i, j) = k(s_i, s_j).
Mat gram(const KernelConfig& k, std::span<const double> s, Exec exec);

/// C(i, j) = k(rows_i, cols_j).
Mat cross_gram(const KernelConfig& k, std::span<const double> rows, std::span<const double> cols,
               Exec exec);

/// L(i, c) = log w_c + log N(x_i; mu_c, Sigma_c) for every row x_i of `points`.
Mat weighted_log_densities(const Mat& points, const GaussianMixture& mix, Exec exec);

/// Row-wise log-sum-exp normalization in place; returns the per-row normalizers.
Vec normalize_log_rows(Mat& log_resp, Exec exec);

}  // namespace tpkmp::kernels
