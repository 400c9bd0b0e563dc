#include "tpkmp/gaussian.hpp"

#include <Eigen/LU>
#include <cmath>
#include <numbers>

#include "tpkmp/errors.hpp"

namespace tpkmp {

Gaussian::Gaussian(Vec mean, const Mat& cov) : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
    throw DimensionError("Gaussian: mean/covariance dimension mismatch");
  }
  if (!mean_.allFinite()) throw ValidationError("Gaussian: non-finite mean");
  auto checked = check_covariance(cov, "Gaussian");
  cov_ = std::move(checked.cov);
  llt_ = std::move(checked.llt);
}

Mat Gaussian::precision() const {
  return symmetrized(llt_.solve(Mat::Identity(dim(), dim())));
}

Vec Gaussian::precision_mean() const { return llt_.solve(mean_); }

double Gaussian::log_density(const Vec& x) const {
  const Vec z = llt_.matrixL().solve(x - mean_);
  const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  const double d = static_cast<double>(dim());
  return -0.5 * (z.squaredNorm() + log_det + d * std::log(2.0 * std::numbers::pi));
}

FramePose::FramePose(Vec origin, Mat rotation)
    : origin_(std::move(origin)), rotation_(std::move(rotation)) {
  if (rotation_.rows() != origin_.size() || rotation_.cols() != origin_.size()) {
    throw DimensionError("FramePose: origin/rotation dimension mismatch");
  }
  if (!origin_.allFinite() || !rotation_.allFinite()) {
    throw ValidationError("FramePose: non-finite task parameters");
  }
}

FramePose FramePose::identity(Index dim) { return {Vec::Zero(dim), Mat::Identity(dim, dim)}; }

FramePose FramePose::planar(const Vec& origin, double angle) {
  if (origin.size() != 2) throw DimensionError("FramePose::planar needs a 2-D origin");
  Mat rot(2, 2);
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return {origin, rot};
}

bool FramePose::is_rotation(double tol) const {
  const Index d = dim();
  const double ortho = (rotation_.transpose() * rotation_ - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

FramePose FramePose::transformed(const Mat& rot, const Vec& offset) const {
  return {rot * origin_ + offset, rot * rotation_};
}

namespace {

Eigen::FullPivLU<Mat> invertible_lu(const FramePose& frame) {
  Eigen::FullPivLU<Mat> lu(frame.rotation());
  if (!lu.isInvertible()) throw FrameSingular("frame rotation A is singular");
  return lu;
}

}  // namespace

Vec project_to_frame(const Vec& x, const FramePose& frame) {
  if (x.size() != frame.dim()) throw DimensionError("project_to_frame: dimension mismatch");
  return invertible_lu(frame).solve(x - frame.origin());
}

Vec map_point_to_global(const Vec& local, const FramePose& frame) {
  if (local.size() != frame.dim()) throw DimensionError("map_point_to_global: dimension mismatch");
  return frame.rotation() * local + frame.origin();
}

Gaussian map_to_global(const Gaussian& local, const FramePose& frame) {
  if (local.dim() != frame.dim()) throw DimensionError("map_to_global: dimension mismatch");
  const Mat& a = frame.rotation();
  return {a * local.mean() + frame.origin(), a * local.cov() * a.transpose()};
}

Gaussian map_to_local(const Gaussian& global, const FramePose& frame) {
  if (global.dim() != frame.dim()) throw DimensionError("map_to_local: dimension mismatch");
  const auto lu = invertible_lu(frame);
  const Mat a_inv = lu.inverse();
  return {a_inv * (global.mean() - frame.origin()), a_inv * global.cov() * a_inv.transpose()};
}

Mat map_cov_to_global(const Mat& cov, const FramePose& frame) {
  const Mat& a = frame.rotation();
  return symmetrized(a * cov * a.transpose());
}

Gaussian gaussian_product(std::span<const Gaussian> factors) {
  if (factors.empty()) throw EmptyData("gaussian_product: no factors");
  if (factors.size() == 1) return factors.front();
  const Index d = factors.front().dim();
  Mat precision = Mat::Zero(d, d);
  Vec info = Vec::Zero(d);
  for (const auto& f : factors) {
    if (f.dim() != d) throw DimensionError("gaussian_product: factor dimension mismatch");
    precision += f.precision();
    info += f.precision_mean();
  }
  auto fused = check_covariance(precision, "gaussian_product precision");
  const Mat cov = fused.llt.solve(Mat::Identity(d, d));
  const Vec mean = fused.llt.solve(info);
  return {mean, cov};
}

Mat fuse_covariances(std::span<const Mat> covs) {
  if (covs.empty()) throw EmptyData("fuse_covariances: no inputs");
  if (covs.size() == 1) return symmetrized(covs.front());
  const Index d = covs.front().rows();
  Mat precision = Mat::Zero(d, d);
  for (const auto& c : covs) {
    if (c.rows() != d || c.cols() != d) throw DimensionError("fuse_covariances: dimension mismatch");
    auto checked = check_covariance(c, "fuse_covariances");
    precision += symmetrized(checked.llt.solve(Mat::Identity(d, d)));
  }
  auto fused = check_covariance(precision, "fuse_covariances precision");
  return symmetrized(fused.llt.solve(Mat::Identity(d, d)));
}

}  // namespace tpkmp
