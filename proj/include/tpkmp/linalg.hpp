#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <optional>

namespace tpkmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky factor of a symmetric matrix, or nullopt when it is not numerically PD.
std::optional<Eigen::LLT<Mat>> try_cholesky(const Mat& m);

/// Symmetrizes `cov` and enforces positive definiteness: one retry with
/// 1e-12 * trace / dim added to the diagonal, then NotPositiveDefinite.
/// Returns the (possibly jittered) matrix together with its factor.
struct CheckedCovariance {
  Mat cov;
  Eigen::LLT<Mat> llt;
};
CheckedCovariance check_covariance(const Mat& cov, const char* what);

double min_eigenvalue(const Mat& symmetric);
double max_eigenvalue(const Mat& symmetric);

/// Frobenius-norm relative difference |a - b| / |b|.
double relative_error(const Mat& a, const Mat& b);

/// Principal square root of a symmetric PSD matrix, computed in its eigenbasis.
Mat sqrtm_psd(const Mat& m);

/// Clamps eigenvalues of a symmetric matrix into [lo, hi].
Mat clamp_eigenvalues(const Mat& m, double lo, double hi);

/// Reciprocal-free condition estimate (ratio of extreme eigenvalue magnitudes).
double condition_estimate(const Mat& symmetric);

}  // namespace tpkmp
