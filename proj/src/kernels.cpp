#include "tpkmp/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace tpkmp::kernels {

Mat gram(const KernelConfig& k, std::span<const double> s, Exec exec) {
  const Index n = static_cast<Index>(s.size());
  Mat g(n, n);
  if (exec == Exec::serial) {
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) g(i, j) = kernel_eval(k, s[i], s[j]);
    }
    return g;
  }
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = kernel_eval(k, s[i], s[j]);
  }
  return g;
}

Mat cross_gram(const KernelConfig& k, std::span<const double> rows, std::span<const double> cols,
               Exec exec) {
  const Index m = static_cast<Index>(rows.size());
  const Index n = static_cast<Index>(cols.size());
  Mat c(m, n);
  if (exec == Exec::serial) {
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i) c(i, j) = kernel_eval(k, rows[i], cols[j]);
    }
    return c;
  }
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) c(i, j) = kernel_eval(k, rows[i], cols[j]);
  }
  return c;
}

namespace {

struct ComponentTerms {
  Mat l;           // lower Cholesky factor
  Vec mean;
  double offset;   // log w - 0.5 (log det + D log 2pi)
};

std::vector<ComponentTerms> component_terms(const GaussianMixture& mix) {
  std::vector<ComponentTerms> out;
  out.reserve(mix.components.size());
  for (Index c = 0; c < mix.size(); ++c) {
    const auto& g = mix.components[c];
    const Mat& packed = g.llt().matrixLLT();
    Mat l = packed.triangularView<Eigen::Lower>();
    const double log_det = 2.0 * packed.diagonal().array().log().sum();
    const double d = static_cast<double>(g.dim());
    const double lw = mix.weights[c] > 0.0 ? std::log(mix.weights[c])
                                           : -std::numeric_limits<double>::infinity();
    out.push_back({std::move(l), g.mean(), lw - 0.5 * (log_det + d * std::log(2.0 * std::numbers::pi))});
  }
  return out;
}

// Forward substitution by hand so the serial and parallel paths do the same arithmetic.
double log_term(const ComponentTerms& t, const Mat& points, Index i, double* z) {
  const Index d = t.mean.size();
  double q = 0.0;
  for (Index r = 0; r < d; ++r) {
    double v = points(i, r) - t.mean[r];
    for (Index c = 0; c < r; ++c) v -= t.l(r, c) * z[c];
    z[r] = v / t.l(r, r);
    q += z[r] * z[r];
  }
  return t.offset - 0.5 * q;
}

}  // namespace

Mat weighted_log_densities(const Mat& points, const GaussianMixture& mix, Exec exec) {
  const auto terms = component_terms(mix);
  const Index n = points.rows();
  const Index k = mix.size();
  const Index d = points.cols();
  Mat out(n, k);
  if (exec == Exec::serial) {
    std::vector<double> z(d);
    for (Index c = 0; c < k; ++c) {
      for (Index i = 0; i < n; ++i) out(i, c) = log_term(terms[c], points, i, z.data());
    }
    return out;
  }
#pragma omp parallel
  {
    std::vector<double> z(d);
#pragma omp for collapse(2) schedule(static)
    for (Index c = 0; c < k; ++c) {
      for (Index i = 0; i < n; ++i) out(i, c) = log_term(terms[c], points, i, z.data());
    }
  }
  return out;
}

namespace {

double normalize_row(Mat& m, Index i) {
  const double mx = m.row(i).maxCoeff();
  if (!std::isfinite(mx)) {
    m.row(i).setConstant(-std::log(static_cast<double>(m.cols())));
    return mx;
  }
  double acc = 0.0;
  for (Index c = 0; c < m.cols(); ++c) acc += std::exp(m(i, c) - mx);
  const double lse = mx + std::log(acc);
  for (Index c = 0; c < m.cols(); ++c) m(i, c) -= lse;
  return lse;
}

}  // namespace

Vec normalize_log_rows(Mat& log_resp, Exec exec) {
  const Index n = log_resp.rows();
  Vec lse(n);
  if (exec == Exec::serial) {
    for (Index i = 0; i < n; ++i) lse[i] = normalize_row(log_resp, i);
    return lse;
  }
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) lse[i] = normalize_row(log_resp, i);
  return lse;
}

}  // namespace tpkmp::kernels
