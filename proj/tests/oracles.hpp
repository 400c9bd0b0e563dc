#pragma once

// Independent reference computations used by the tests. They deliberately take
// the slow, obvious route (dense matrices, explicit LU/LDLT, brute-force grids).

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tpkmp/gmm.hpp"
#include "tpkmp/kernel.hpp"
#include "tpkmp/kmp.hpp"

namespace oracle {

using tpkmp::Index;
using tpkmp::Mat;
using tpkmp::Vec;

struct Moments {
  double mean;
  double var;
};

/// Multiply two 1-D normal densities on a uniform grid spanning +-8 sigma of
/// both factors, renormalize and return the first two moments.
inline Moments grid_product(double m1, double v1, double m2, double v2, int points = 100000) {
  const double lo = std::min(m1 - 8.0 * std::sqrt(v1), m2 - 8.0 * std::sqrt(v2));
  const double hi = std::max(m1 + 8.0 * std::sqrt(v1), m2 + 8.0 * std::sqrt(v2));
  const double h = (hi - lo) / (points - 1);
  long double z = 0, s1 = 0, s2 = 0;
  for (int i = 0; i < points; ++i) {
    const long double x = lo + h * i;
    const long double d = std::exp(-0.5L * (x - m1) * (x - m1) / v1 - 0.5L * (x - m2) * (x - m2) / v2);
    z += d;
    s1 += d * x;
    s2 += d * x * x;
  }
  const long double mean = s1 / z;
  return {static_cast<double>(mean), static_cast<double>(s2 / z - mean * mean)};
}

/// Matern 5/2 in long double, written out from the closed form.
inline long double matern52(long double r, long double l, long double s2) {
  const long double q = std::sqrt(5.0L) * r / l;
  return s2 * (1.0L + q + 5.0L * r * r / (3.0L * l * l)) * std::exp(-q);
}

struct DensePrediction {
  Vec mean;
  Mat cov, ep, al;
};

/// KMP prediction from explicitly assembled N*O matrices and LU solves.
inline DensePrediction dense_kmp(const tpkmp::ReferenceDistribution& ref, const tpkmp::KernelConfig& k,
                                 const tpkmp::KmpHyper& h, double s) {
  const Index n = ref.size();
  const Index o = ref.output_dim();
  Mat kk = Mat::Zero(n * o, n * o), sig = Mat::Zero(n * o, n * o), ks = Mat::Zero(o, n * o);
  Vec mu(n * o);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      kk.block(i * o, j * o, o, o) = tpkmp::kernel_eval(k, ref.entries[i].s, ref.entries[j].s) * Mat::Identity(o, o);
    }
    sig.block(i * o, i * o, o, o) = ref.entries[i].sigma;
    mu.segment(i * o, o) = ref.entries[i].mu;
    ks.block(0, i * o, o, o) = tpkmp::kernel_eval(k, s, ref.entries[i].s) * Mat::Identity(o, o);
  }
  const Mat kss = tpkmp::kernel_eval(k, s, s) * Mat::Identity(o, o);
  DensePrediction p;
  p.mean = ks * (kk + h.lambda1 * sig).fullPivLu().solve(mu);
  p.cov = h.alpha * (kss - ks * (kk + h.lambda2 * sig).fullPivLu().solve(ks.transpose()));
  p.ep = kss - ks * kk.fullPivLu().solve(ks.transpose());
  const Mat lam_inv = (h.lambda2 * sig).fullPivLu().inverse();
  p.al = ks * (kk + kk * lam_inv * kk).fullPivLu().solve(ks.transpose());
  return p;
}

/// GP posterior variance k** - k* K^{-1} k*^T from the scalar Gram, solved in
/// long double so that its own roundoff sits well below the double result.
inline double gp_posterior_variance(const std::vector<double>& inputs, const tpkmp::KernelConfig& k, double s) {
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const Index n = static_cast<Index>(inputs.size());
  const long double l = k.length_scale, s2 = k.signal_variance;
  MatL g(n, n);
  VecL ks(n);
  for (Index i = 0; i < n; ++i) {
    ks[i] = matern52(std::abs((long double)s - inputs[i]), l, s2);
    for (Index j = 0; j < n; ++j) g(i, j) = matern52(std::abs((long double)inputs[i] - inputs[j]), l, s2);
  }
  return static_cast<double>(s2 - ks.dot(g.llt().solve(ks)));
}

/// Conditional p(x | s) of a 2-D mixture by brute-force integration over an x-grid.
inline Moments grid_conditional(const tpkmp::GaussianMixture& mix, double s, double lo, double hi,
                                int points = 200001) {
  const double h = (hi - lo) / (points - 1);
  long double z = 0, s1 = 0, s2 = 0;
  for (int i = 0; i < points; ++i) {
    const double x = lo + h * i;
    Vec p(2);
    p << s, x;
    long double d = 0;
    for (Index c = 0; c < mix.size(); ++c) d += mix.weights[c] * std::exp(mix.components[c].log_density(p));
    z += d;
    s1 += d * x;
    s2 += d * (long double)x * x;
  }
  const long double mean = s1 / z;
  return {static_cast<double>(mean), static_cast<double>(s2 / z - mean * mean)};
}

}  // namespace oracle
