#include "tpkmp/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "tpkmp/errors.hpp"
#include "tpkmp/kernels.hpp"

namespace tpkmp {

void Demonstration::validate() const {
  if (inputs.size() < 2) throw ValidationError("demonstration needs at least 2 samples");
  if (outputs.rows() != length()) throw DimensionError("demonstration inputs/outputs length mismatch");
  if (outputs.cols() < 1) throw DimensionError("demonstration has no output dimensions");
  if (!(inputs.front() >= 0.0)) throw ValidationError("demonstration inputs must start at s >= 0");
  for (std::size_t h = 0; h < inputs.size(); ++h) {
    if (!std::isfinite(inputs[h])) throw ValidationError("demonstration input is not finite");
    if (h > 0 && !(inputs[h] > inputs[h - 1])) {
      throw ValidationError("demonstration inputs must be strictly increasing (sample " +
                            std::to_string(h) + ")");
    }
  }
  if (!outputs.allFinite()) throw ValidationError("demonstration output is not finite");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw ValidationError("demonstration duration must be positive");
  }
  for (const auto& f : frames) {
    if (f.dim() != output_dim()) throw DimensionError("demonstration frame dimension mismatch");
  }
}

void GaussianMixture::validate() const {
  if (components.empty() || static_cast<Index>(components.size()) != weights.size()) {
    throw DimensionError("mixture weights/components mismatch");
  }
  if ((weights.array() < 0.0).any()) throw ValidationError("mixture weight is negative");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ValidationError("mixture weights do not sum to 1");
  for (const auto& c : components) {
    if (c.dim() != dim()) throw DimensionError("mixture component dimension mismatch");
  }
}

void ReferenceDistribution::validate() const {
  if (entries.empty()) throw EmptyData("reference distribution is empty");
  const Index o = entries.front().mu.size();
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto& e = entries[n];
    if (e.mu.size() != o || e.sigma.rows() != o || e.sigma.cols() != o) {
      throw DimensionError("reference entry dimension mismatch");
    }
    if (!std::isfinite(e.s) || !e.mu.allFinite()) throw ValidationError("reference entry not finite");
    if (n > 0 && !(e.s > entries[n - 1].s)) {
      throw ValidationError("reference inputs must be strictly increasing");
    }
    check_covariance(e.sigma, "reference entry");
  }
}

Mat joint_points(std::span<const Demonstration> demos) {
  Index rows = 0;
  Index o = -1;
  for (const auto& d : demos) {
    d.validate();
    if (o >= 0 && d.output_dim() != o) throw DimensionError("demonstrations differ in output dimension");
    o = d.output_dim();
    rows += d.length();
  }
  if (rows == 0) throw EmptyData("no demonstration samples");
  Mat pts(rows, o + 1);
  Index r = 0;
  for (const auto& d : demos) {
    for (Index h = 0; h < d.length(); ++h, ++r) {
      pts(r, 0) = d.inputs[h];
      pts.row(r).tail(o) = d.outputs.row(h);
    }
  }
  return pts;
}

namespace {

Mat floored(const Mat& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(cov));
  Vec ev = es.eigenvalues().cwiseMax(floor);
  return symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

std::vector<Index> kmeanspp_centers(const Mat& x, int k, std::mt19937_64& rng) {
  const Index n = x.rows();
  std::vector<Index> centers;
  centers.reserve(k);
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.push_back(first(rng));
  Vec d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double u = unit(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

GaussianMixture hard_moment_match(const Mat& x, const std::vector<Index>& centers, const Mat& data_cov,
                                  double floor) {
  const Index n = x.rows();
  const Index d = x.cols();
  const Index k = static_cast<Index>(centers.size());
  std::vector<Index> label(n);
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < k; ++c) {
      const double dist = (x.row(i) - x.row(centers[c])).squaredNorm();
      if (dist < best) {
        best = dist;
        label[i] = c;
      }
    }
  }
  GaussianMixture mix;
  mix.weights = Vec::Zero(k);
  for (Index c = 0; c < k; ++c) {
    Vec mean = Vec::Zero(d);
    Index count = 0;
    for (Index i = 0; i < n; ++i) {
      if (label[i] == c) {
        mean += x.row(i).transpose();
        ++count;
      }
    }
    if (count == 0) {
      // duplicate seed points; start from the data spread
      mix.weights[c] = 1.0 / static_cast<double>(n);
      mix.components.emplace_back(x.row(centers[c]).transpose(), floored(data_cov, floor));
      continue;
    }
    mean /= static_cast<double>(count);
    Mat cov = Mat::Zero(d, d);
    for (Index i = 0; i < n; ++i) {
      if (label[i] == c) {
        const Vec dx = x.row(i).transpose() - mean;
        cov += dx * dx.transpose();
      }
    }
    cov /= static_cast<double>(count);
    mix.weights[c] = static_cast<double>(count) / static_cast<double>(n);
    mix.components.emplace_back(mean, floored(cov, floor));
  }
  mix.weights /= mix.weights.sum();
  return mix;
}

}  // namespace

GmmFit fit_gmm_points(const Mat& x, int k, std::uint64_t seed, const EmOptions& opts, Exec exec) {
  if (x.rows() == 0) throw EmptyData("fit_gmm: no data");
  if (k < 1) throw ValidationError("fit_gmm: K must be at least 1");
  if (!x.allFinite()) throw ValidationError("fit_gmm: data not finite");
  const Index n = x.rows();
  const Index d = x.cols();
  if (n < static_cast<Index>(k) * (d + 1)) {
    throw ValidationError("fit_gmm: need at least K*(D+1) points");
  }

  const Vec data_mean = x.colwise().mean().transpose();
  const Mat centered = x.rowwise() - data_mean.transpose();
  const Mat data_cov = centered.transpose() * centered / static_cast<double>(n);
  double floor = 1e-6 * data_cov.trace() / static_cast<double>(d);
  if (!(floor > 0.0)) floor = 1e-12;

  std::mt19937_64 rng(seed);
  GmmFit fit;
  fit.mixture = hard_moment_match(x, kmeanspp_centers(x, k, rng), data_cov, floor);

  for (int it = 0;; ++it) {
    Mat resp = kernels::weighted_log_densities(x, fit.mixture, exec);
    const double ll = kernels::normalize_log_rows(resp, exec).sum();
    fit.log_likelihood.push_back(ll);
    if (it > 0 && opts.rel_tol >= 0.0) {
      const double prev = fit.log_likelihood[it - 1];
      if ((ll - prev) < opts.rel_tol * std::abs(prev)) break;
    }
    if (it >= opts.max_iterations) break;

    resp = resp.array().exp();
    const Vec nk = resp.colwise().sum().transpose();
    GaussianMixture next;
    next.weights = Vec::Zero(k);
    for (Index c = 0; c < k; ++c) {
      if (!(nk[c] > 0.0)) {
        next.components.push_back(fit.mixture.components[c]);
        continue;
      }
      const Vec mean = (x.transpose() * resp.col(c)) / nk[c];
      const Mat dx = x.rowwise() - mean.transpose();
      const Mat cov = dx.transpose() * resp.col(c).asDiagonal() * dx / nk[c];
      next.weights[c] = nk[c] / static_cast<double>(n);
      next.components.emplace_back(mean, floored(cov, floor));
    }
    next.weights /= next.weights.sum();
    fit.mixture = std::move(next);
    fit.iterations = it + 1;
  }
  return fit;
}

GmmFit fit_gmm(std::span<const Demonstration> demos, int k, std::uint64_t seed, const EmOptions& opts,
               Exec exec) {
  if (demos.empty()) throw EmptyData("fit_gmm: no demonstrations");
  return fit_gmm_points(joint_points(demos), k, seed, opts, exec);
}

namespace {

struct Conditional {
  double mu_s;
  double var_s;
  Vec mu_x;
  Vec cross;  // Sigma_xs / Sigma_ss
  Mat cov;    // Schur complement
  double log_prefactor;
};

RefEntry condition_at(const std::vector<Conditional>& conds, double s) {
  const std::size_t k = conds.size();
  std::vector<double> lh(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double ds = s - conds[c].mu_s;
    lh[c] = conds[c].log_prefactor - 0.5 * ds * ds / conds[c].var_s;
    mx = std::max(mx, lh[c]);
  }
  double total = 0.0;
  for (auto& v : lh) {
    v = std::exp(v - mx);
    total += v;
  }
  const Index o = conds.front().mu_x.size();
  std::vector<Vec> means(k);
  Vec mean = Vec::Zero(o);
  for (std::size_t c = 0; c < k; ++c) {
    lh[c] /= total;
    means[c] = conds[c].mu_x + conds[c].cross * (s - conds[c].mu_s);
    mean += lh[c] * means[c];
  }
  Mat cov = Mat::Zero(o, o);
  for (std::size_t c = 0; c < k; ++c) {
    const Vec dm = means[c] - mean;
    cov += lh[c] * (conds[c].cov + dm * dm.transpose());
  }
  return {s, mean, symmetrized(cov)};
}

}  // namespace

ReferenceDistribution gmr(const GaussianMixture& mixture, std::span<const double> queries, Exec exec) {
  mixture.validate();
  if (mixture.dim() < 2) throw DimensionError("gmr: mixture needs an input and an output dimension");
  for (std::size_t i = 1; i < queries.size(); ++i) {
    if (!(queries[i] > queries[i - 1])) throw ValidationError("gmr: queries must be strictly increasing");
  }
  const Index o = mixture.dim() - 1;
  std::vector<Conditional> conds;
  for (Index c = 0; c < mixture.size(); ++c) {
    if (!(mixture.weights[c] > 0.0)) continue;
    const auto& g = mixture.components[c];
    const double var_s = g.cov()(0, 0);
    const Vec sx = g.cov().col(0).tail(o);
    Conditional cd;
    cd.mu_s = g.mean()[0];
    cd.var_s = var_s;
    cd.mu_x = g.mean().tail(o);
    cd.cross = sx / var_s;
    cd.cov = symmetrized(g.cov().bottomRightCorner(o, o) - sx * sx.transpose() / var_s);
    cd.log_prefactor = std::log(mixture.weights[c]) - 0.5 * std::log(2.0 * std::numbers::pi * var_s);
    conds.push_back(std::move(cd));
  }

  ReferenceDistribution out;
  const Index q = static_cast<Index>(queries.size());
  out.entries.resize(q);
  if (exec == Exec::serial) {
    for (Index i = 0; i < q; ++i) out.entries[i] = condition_at(conds, queries[i]);
  } else {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < q; ++i) out.entries[i] = condition_at(conds, queries[i]);
  }
  return out;
}

std::vector<double> make_inputs(Index n, double s_max) {
  if (n < 2) throw ValidationError("make_inputs: need N >= 2");
  if (!(s_max > 0.0)) throw ValidationError("make_inputs: s_max must be positive");
  std::vector<double> s(n);
  const double denom = static_cast<double>(n - 1);
  for (Index i = 0; i < n; ++i) s[i] = s_max * static_cast<double>(i) / denom;
  s.back() = s_max;
  return s;
}

}  // namespace tpkmp
