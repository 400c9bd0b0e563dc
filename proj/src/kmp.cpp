#include "tpkmp/kmp.hpp"

#include <algorithm>
#include <cmath>

#include "tpkmp/errors.hpp"
#include "tpkmp/kernels.hpp"

namespace tpkmp {

void KmpHyper::validate() const {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || !(alpha > 0.0)) {
    throw ValidationError("KMP hyperparameters lambda1, lambda2, alpha must be positive");
  }
}

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

struct Kmp::Cache {
  std::vector<double> s;
  Index n = 0;
  Index o = 0;
  bool iso = false;
  Eigen::LLT<Mat> g;   // scalar Gram
  Eigen::LLT<MatL> g_ld;  // scalar Gram in extended precision, for the epistemic term
  Eigen::LLT<Mat> a2;  // K + lambda2 Sigma (N x N when iso, else N*O x N*O)
  Mat w;               // O x N mean weights (K + lambda1 Sigma)^{-1} mu
  Mat lam;             // lambda2 Sigma: N x 1 when iso, else O x (N*O) blocks
};

namespace {

constexpr Index kBlock = 64;
// Below this fraction of k** the double epistemic term is already accurate to ~1e-15.
constexpr double kRefineEp = 1e-6;

struct Factor {
  Eigen::LLT<Mat> llt;
  double jitter = 0.0;
};

Factor factor(const Mat& m, double scale, const char* what) {
  if (auto l = try_cholesky(m)) return {std::move(*l), 0.0};
  const Index n = m.rows();
  for (double eps = 1e-12; eps < 1.5e-8; eps *= 10.0) {
    Mat j = m;
    j.diagonal().array() += eps * scale;
    if (auto l = try_cholesky(j)) return {std::move(*l), eps * scale};
  }
  throw IllConditioned(std::string(what) + " is not numerically positive definite (" +
                           std::to_string(n) + "x" + std::to_string(n) + ")",
                       condition_estimate(m));
}

void predict_block(const Kmp::Cache& c, const KernelConfig& k, const KmpHyper& h,
                   std::span<const double> qs, Prediction* out) {
  const Index q = static_cast<Index>(qs.size());
  const Index n = c.n;
  const Index o = c.o;
  Mat gq(n, q);  // k*^T, one column per query
  for (Index i = 0; i < q; ++i) {
    for (Index m = 0; m < n; ++m) gq(m, i) = kernel_eval(k, qs[i], c.s[m]);
  }
  const Mat yg = c.g.matrixL().solve(gq);
  const Mat means = c.w * gq;

  // Sigma_ep = k** - |L^{-1} k*|^2 loses ~cond(G) * eps relative to its own size in
  // double; redo the queries where that is visible with the extended factor.
  std::vector<double> ep(q);
  std::vector<Index> refine;
  for (Index i = 0; i < q; ++i) {
    const double kss = kernel_eval(k, qs[i], qs[i]);
    ep[i] = kss - yg.col(i).squaredNorm();
    if (ep[i] > kRefineEp * kss) refine.push_back(i);
  }
  if (!refine.empty()) {
    MatL gl(n, static_cast<Index>(refine.size()));
    for (std::size_t j = 0; j < refine.size(); ++j) {
      for (Index m = 0; m < n; ++m) gl(m, j) = kernel_eval_ld(k, qs[refine[j]], c.s[m]);
    }
    const MatL yl = c.g_ld.matrixL().solve(gl);
    for (std::size_t j = 0; j < refine.size(); ++j) {
      const Index i = refine[j];
      ep[i] = static_cast<double>(kernel_eval_ld(k, qs[i], qs[i]) - yl.col(j).squaredNorm());
    }
  }

  if (c.iso) {
    const Mat y2 = c.a2.matrixL().solve(gq);
    const Mat z = c.a2.matrixU().solve(y2);
    const Mat cz = c.lam.col(0).asDiagonal() * z;
    const Mat y3 = c.g.matrixL().solve(cz);
    for (Index i = 0; i < q; ++i) {
      const double kss = kernel_eval(k, qs[i], qs[i]);
      const Mat eye = Mat::Identity(o, o);
      Prediction& p = out[i];
      p.mean = means.col(i);
      p.cov = h.alpha * (kss - y2.col(i).squaredNorm()) * eye;
      p.cov_ep = ep[i] * eye;
      p.cov_al = (z.col(i).dot(cz.col(i)) + y3.col(i).squaredNorm()) * eye;
    }
    return;
  }

  const Index no = n * o;
  Mat b = Mat::Zero(no, q * o);
  for (Index i = 0; i < q; ++i) {
    for (Index a = 0; a < o; ++a) {
      for (Index m = 0; m < n; ++m) b(m * o + a, i * o + a) = gq(m, i);
    }
  }
  const Mat y2 = c.a2.matrixL().solve(b);
  const Mat z = c.a2.matrixU().solve(y2);
  Mat cz(no, q * o);  // Lambda Z
  for (Index m = 0; m < n; ++m) {
    cz.middleRows(m * o, o).noalias() = c.lam.middleCols(m * o, o) * z.middleRows(m * o, o);
  }
  // rearrange so that K^{-1} = G^{-1} (x) I acts on N-vectors
  Mat r(n, q * o * o);
  for (Index col = 0; col < q * o; ++col) {
    for (Index a = 0; a < o; ++a) {
      for (Index m = 0; m < n; ++m) r(m, col * o + a) = cz(m * o + a, col);
    }
  }
  const Mat y3 = c.g.matrixL().solve(r);

  for (Index i = 0; i < q; ++i) {
    const double kss = kernel_eval(k, qs[i], qs[i]);
    Prediction& p = out[i];
    p.mean = means.col(i);
    const auto y2i = y2.middleCols(i * o, o);
    p.cov = symmetrized(h.alpha * (kss * Mat::Identity(o, o) - y2i.transpose() * y2i));
    p.cov_ep = ep[i] * Mat::Identity(o, o);
    Mat al = z.middleCols(i * o, o).transpose() * cz.middleCols(i * o, o);
    for (Index bi = 0; bi < o; ++bi) {
      for (Index bj = 0; bj < o; ++bj) {
        double acc = 0.0;
        for (Index a = 0; a < o; ++a) {
          acc += y3.col((i * o + bi) * o + a).dot(y3.col((i * o + bj) * o + a));
        }
        al(bi, bj) += acc;
      }
    }
    p.cov_al = symmetrized(al);
  }
}

}  // namespace

double default_replace_radius(const ReferenceDistribution& ref) {
  if (ref.size() < 2) return 0.0;
  return 0.5 * (ref.entries.back().s - ref.entries.front().s) / static_cast<double>(ref.size() - 1);
}

bool all_isotropic(const ReferenceDistribution& ref) {
  for (const auto& e : ref.entries) {
    const Index o = e.sigma.rows();
    const double v = e.sigma(0, 0);
    for (Index i = 0; i < o; ++i) {
      for (Index j = 0; j < o; ++j) {
        if (e.sigma(i, j) != (i == j ? v : 0.0)) return false;
      }
    }
  }
  return true;
}

Kmp::Kmp(ReferenceDistribution ref, KernelConfig kernel, KmpHyper hyper)
    : Kmp(ref, kernel, hyper, default_replace_radius(ref)) {}

Kmp::Kmp(ReferenceDistribution ref, KernelConfig kernel, KmpHyper hyper, double replace_radius,
         bool build)
    : ref_(std::move(ref)), kernel_(kernel), hyper_(hyper), replace_radius_(replace_radius) {
  kernel_.validate();
  hyper_.validate();
  if (!(replace_radius_ >= 0.0)) throw ValidationError("replace radius must be non-negative");
  if (build) rebuild();
}

bool Kmp::isotropic() const {
  if (!cache_) throw ContractViolation("KMP cache is stale");
  return cache_->iso;
}

void Kmp::rebuild() {
  ref_.validate();
  auto c = std::make_shared<Cache>();
  c->n = ref_.size();
  c->o = ref_.output_dim();
  c->iso = all_isotropic(ref_);
  c->s.reserve(c->n);
  for (auto& e : ref_.entries) {
    e.sigma = symmetrized(e.sigma);
    c->s.push_back(e.s);
  }
  const Index n = c->n;
  const Index o = c->o;
  const Mat g = kernels::gram(kernel_, c->s, Exec::parallel);
  auto gf = factor(g, kernel_.signal_variance, "Gram matrix");
  c->g = std::move(gf.llt);
  {
    MatL gl(n, n);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) gl(i, j) = kernel_eval_ld(kernel_, c->s[i], c->s[j]);
    }
    gl.diagonal().array() += static_cast<long double>(gf.jitter);
    c->g_ld.compute(gl);
    if (c->g_ld.info() != Eigen::Success) {
      throw IllConditioned("extended-precision Gram matrix is not positive definite", condition_estimate(g));
    }
  }

  if (c->iso) {
    Vec sig(n);
    Mat mu(n, o);
    for (Index m = 0; m < n; ++m) {
      sig[m] = ref_.entries[m].sigma(0, 0);
      mu.row(m) = ref_.entries[m].mu.transpose();
    }
    Mat a1 = g;
    a1.diagonal() += hyper_.lambda1 * sig;
    Mat a2 = g;
    a2.diagonal() += hyper_.lambda2 * sig;
    const auto a1_llt = factor(a1, kernel_.signal_variance, "K + lambda1 Sigma").llt;
    c->a2 = factor(a2, kernel_.signal_variance, "K + lambda2 Sigma").llt;
    c->w = a1_llt.solve(mu).transpose();
    c->lam = hyper_.lambda2 * sig;
  } else {
    const Index no = n * o;
    Mat a1 = Mat::Zero(no, no);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        for (Index a = 0; a < o; ++a) a1(i * o + a, j * o + a) = g(i, j);
      }
    }
    Mat a2 = a1;
    Vec mu(no);
    c->lam.resize(o, no);
    for (Index m = 0; m < n; ++m) {
      const auto& e = ref_.entries[m];
      a1.block(m * o, m * o, o, o) += hyper_.lambda1 * e.sigma;
      a2.block(m * o, m * o, o, o) += hyper_.lambda2 * e.sigma;
      c->lam.middleCols(m * o, o) = hyper_.lambda2 * e.sigma;
      mu.segment(m * o, o) = e.mu;
    }
    const auto a1_llt = factor(a1, kernel_.signal_variance, "K + lambda1 Sigma").llt;
    c->a2 = factor(a2, kernel_.signal_variance, "K + lambda2 Sigma").llt;
    const Vec w = a1_llt.solve(mu);
    c->w = Eigen::Map<const Mat>(w.data(), o, n);
  }
  cache_ = std::move(c);
}

std::vector<Prediction> Kmp::predict_batch(std::span<const double> s, Exec exec) const {
  if (!cache_) throw ContractViolation("KMP cache is stale; rebuild() before predicting");
  const Index q = static_cast<Index>(s.size());
  std::vector<Prediction> out(q);
  const Index blocks = (q + kBlock - 1) / kBlock;
  const Cache& c = *cache_;
  if (exec == Exec::serial) {
    for (Index b = 0; b < blocks; ++b) {
      const Index lo = b * kBlock;
      predict_block(c, kernel_, hyper_, s.subspan(lo, std::min(kBlock, q - lo)), out.data() + lo);
    }
    return out;
  }
#pragma omp parallel for schedule(dynamic)
  for (Index b = 0; b < blocks; ++b) {
    const Index lo = b * kBlock;
    predict_block(c, kernel_, hyper_, s.subspan(lo, std::min(kBlock, q - lo)), out.data() + lo);
  }
  return out;
}

Prediction Kmp::predict(double s) const {
  const double q[1] = {s};
  return std::move(predict_batch(q, Exec::serial).front());
}

InsertResult Kmp::insert_via_point(const RefEntry& vp) {
  if (vp.mu.size() != output_dim()) throw DimensionError("via-point dimension mismatch");
  if (!std::isfinite(vp.s) || !vp.mu.allFinite()) throw ValidationError("via-point not finite");
  auto checked = check_covariance(vp.sigma, "via-point");
  RefEntry e{vp.s, vp.mu, std::move(checked.cov)};

  auto& entries = ref_.entries;
  cache_.reset();
  const auto it = std::lower_bound(entries.begin(), entries.end(), vp.s,
                                   [](const RefEntry& a, double s) { return a.s < s; });
  const Index pos = it - entries.begin();
  Index nearest = -1;
  double best = 0.0;
  for (Index cand : {pos - 1, pos}) {
    if (cand < 0 || cand >= ref_.size()) continue;
    const double d = std::abs(entries[cand].s - vp.s);
    if (nearest < 0 || d < best) {
      nearest = cand;
      best = d;
    }
  }
  if (nearest >= 0 && (best < replace_radius_ || best == 0.0)) {
    entries[nearest] = std::move(e);
    return {nearest, true};
  }
  entries.insert(entries.begin() + pos, std::move(e));
  return {pos, false};
}

InsertResult Kmp::add_via_point(const RefEntry& vp) {
  const auto r = insert_via_point(vp);
  rebuild();
  return r;
}

Mat Kmp::scalar_gram() const {
  std::vector<double> s;
  for (const auto& e : ref_.entries) s.push_back(e.s);
  return kernels::gram(kernel_, s, Exec::serial);
}

Mat Kmp::full_gram() const {
  const Mat g = scalar_gram();
  const Index n = g.rows();
  const Index o = output_dim();
  Mat k = Mat::Zero(n * o, n * o);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      for (Index a = 0; a < o; ++a) k(i * o + a, j * o + a) = g(i, j);
    }
  }
  return k;
}

}  // namespace tpkmp
