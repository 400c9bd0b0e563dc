#include "tpkmp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tpkmp/errors.hpp"

namespace tpkmp {

std::optional<Eigen::LLT<Mat>> try_cholesky(const Mat& m) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  // LLT happily factors matrices with NaNs on the diagonal.
  const auto& l = llt.matrixLLT();
  for (Index i = 0; i < l.rows(); ++i) {
    const double d = l(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
  }
  return llt;
}

CheckedCovariance check_covariance(const Mat& cov, const char* what) {
  if (cov.rows() != cov.cols()) {
    throw DimensionError(std::string(what) + ": covariance is not square");
  }
  if (!cov.allFinite()) {
    throw NotPositiveDefinite(std::string(what) + ": covariance has non-finite entries");
  }
  Mat sym = symmetrized(cov);
  if (auto llt = try_cholesky(sym)) return {std::move(sym), std::move(*llt)};

  const double dim = static_cast<double>(sym.rows());
  const double jitter = 1e-12 * sym.trace() / dim;
  if (jitter > 0.0) {
    sym.diagonal().array() += jitter;
    if (auto llt = try_cholesky(sym)) return {std::move(sym), std::move(*llt)};
  }
  throw NotPositiveDefinite(std::string(what) + ": covariance is not positive definite");
}

double min_eigenvalue(const Mat& symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Mat& symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double relative_error(const Mat& a, const Mat& b) {
  const double denom = b.norm();
  const double diff = (a - b).norm();
  if (denom == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / denom;
}

Mat sqrtm_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m));
  Vec roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

Mat clamp_eigenvalues(const Mat& m, double lo, double hi) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m));
  Vec ev = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  return symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

double condition_estimate(const Mat& symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(symmetric), Eigen::EigenvaluesOnly);
  const Vec mags = es.eigenvalues().cwiseAbs();
  const double lo = mags.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return mags.maxCoeff() / lo;
}

}  // namespace tpkmp
