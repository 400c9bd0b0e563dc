#pragma once

#include <span>
#include <vector>

#include "tpkmp/linalg.hpp"

namespace tpkmp {

/// Multivariate normal distribution with a symmetric positive definite covariance.
///
/// Construction symmetrizes the covariance as (S + S^T) / 2 and checks that it is
/// positive definite, retrying once with a tiny trace-relative jitter. The
/// Cholesky factor is kept so that precisions are always obtained by solves.
class Gaussian {
 public:
  Gaussian(Vec mean, const Mat& cov);

  const Vec& mean() const noexcept { return mean_; }
  const Mat& cov() const noexcept { return cov_; }
  Index dim() const noexcept { return mean_.size(); }

  /// Sigma^{-1} via the stored Cholesky factor.
  Mat precision() const;
  /// Sigma^{-1} mu via the stored Cholesky factor.
  Vec precision_mean() const;
  double log_density(const Vec& x) const;
  const Eigen::LLT<Mat>& llt() const noexcept { return llt_; }

 private:
  Vec mean_;
  Mat cov_;
  Eigen::LLT<Mat> llt_;
};

/// Task parameters of one object frame: origin b and linear map A (a rotation
/// for rigid objects). Points map to the frame through A^{-1}(x - b).
class FramePose {
 public:
  FramePose(Vec origin, Mat rotation);

  static FramePose identity(Index dim);
  /// In-plane rotation by `angle` radians about the origin, 2-D only.
  static FramePose planar(const Vec& origin, double angle);

  const Vec& origin() const noexcept { return origin_; }
  const Mat& rotation() const noexcept { return rotation_; }
  Index dim() const noexcept { return origin_.size(); }

  /// A^T A = I and det(A) = +1 within `tol`.
  bool is_rotation(double tol = 1e-10) const;

  /// Rigidly moves the frame: x -> R x + d applied to the pose.
  FramePose transformed(const Mat& rot, const Vec& offset) const;

 private:
  Vec origin_;
  Mat rotation_;
};

/// A^{-1}(x - b). Throws FrameSingular when A is not invertible.
Vec project_to_frame(const Vec& x, const FramePose& frame);

/// A x + b.
Vec map_point_to_global(const Vec& local, const FramePose& frame);

/// N(A mu + b, A Sigma A^T).
Gaussian map_to_global(const Gaussian& local, const FramePose& frame);

/// N(A^{-1}(mu - b), A^{-1} Sigma A^{-T}); the inverse of map_to_global.
Gaussian map_to_local(const Gaussian& global, const FramePose& frame);

/// Affine transform of a bare covariance A S A^T (no PD check; used for PSD split terms).
Mat map_cov_to_global(const Mat& cov, const FramePose& frame);

/// Product of Gaussians: Sigma = (sum_p Sigma_p^{-1})^{-1}, mu = Sigma sum_p Sigma_p^{-1} mu_p.
/// All inverses are Cholesky solves.
Gaussian gaussian_product(std::span<const Gaussian> factors);

/// Precision-weighted fusion of bare covariance matrices (the covariance part of
/// gaussian_product), used to fuse the epistemic and aleatoric parts separately.
Mat fuse_covariances(std::span<const Mat> covs);

}  // namespace tpkmp
