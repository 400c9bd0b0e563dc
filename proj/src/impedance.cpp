#include "tpkmp/impedance.hpp"

#include <cmath>

#include "tpkmp/errors.hpp"

namespace tpkmp {

namespace {

Mat regularized_inverse(const Mat& cov, double delta, double reg) {
  const Index o = cov.rows();
  Mat m = symmetrized(delta * cov);
  m.diagonal().array() += reg;
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("regularized covariance is not positive definite");
  return symmetrized(llt.solve(Mat::Identity(o, o)));
}

// clamp in the eigenbasis and derive critical damping from the same decomposition
void finish(Gains& g, const StiffnessConfig& cfg, double mass) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(g.GP));
  const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseMin(cfg.g_max);
  const Mat& q = es.eigenvectors();
  g.GP = symmetrized(q * ev.asDiagonal() * q.transpose());
  const Vec d = 2.0 * std::sqrt(mass) * ev.cwiseSqrt();
  g.GD = symmetrized(q * d.asDiagonal() * q.transpose());
}

void check_mass(double mass) {
  if (!(mass > 0.0)) throw ValidationError("mass must be positive");
}

}  // namespace

void StiffnessConfig::validate() const {
  if (!(c1 > 0.0)) throw ValidationError("c1 must be positive");
  if (!(reg > 0.0)) throw ValidationError("reg must be positive");
  if (!(g_max > 0.0)) throw ValidationError("g_max must be positive");
  if (!(delta_ep > 0.0) || !(delta_al > 0.0)) throw ValidationError("delta_ep and delta_al must be positive");
}

double sigmoid_weight(const StiffnessConfig& cfg, double sigma2_ep) {
  return 1.0 / (1.0 + std::exp(-cfg.c1 * (sigma2_ep - cfg.c2)));
}

double epistemic_variance(const Mat& cov_ep) { return cov_ep.trace() / static_cast<double>(cov_ep.rows()); }

Gains compute_gains(const StiffnessConfig& cfg, const Mat& cov_ep, const Mat& cov_al, double mass) {
  check_mass(mass);
  if (cov_ep.rows() != cov_al.rows()) throw DimensionError("epistemic/aleatoric dimension mismatch");
  Gains g;
  g.w1 = sigmoid_weight(cfg, epistemic_variance(cov_ep));
  const double w2 = 1.0 - g.w1;
  g.GP = g.w1 * regularized_inverse(cov_ep, cfg.delta_ep, cfg.reg) +
         w2 * regularized_inverse(cov_al, cfg.delta_al, cfg.reg);
  finish(g, cfg, mass);
  return g;
}

Gains compute_gains(const StiffnessConfig& cfg, const FusedPrediction& pred, double mass) {
  return compute_gains(cfg, pred.cov_ep, pred.cov_al, mass);
}

Gains raw_gains(const StiffnessConfig& cfg, const Mat& cov, const Mat& cov_ep, double mass) {
  check_mass(mass);
  Gains g;
  g.w1 = sigmoid_weight(cfg, epistemic_variance(cov_ep));
  g.GP = regularized_inverse(cov, 1.0, cfg.reg);
  finish(g, cfg, mass);
  return g;
}

SimState step(const SimState& s, const Gains& g, const Vec& desired, const Vec& external_force, double dt) {
  if (!(dt > 0.0) || dt > 0.01) throw ValidationError("dt must lie in (0, 0.01]");
  const Index o = s.pos.size();
  if (s.vel.size() != o || desired.size() != o || external_force.size() != o || g.GP.rows() != o) {
    throw DimensionError("state, gains and targets disagree on dimension");
  }
  // (m + dt G_D + dt^2 G_P) v' = m v + dt (G_P (desired - x) + F)
  Mat lhs = dt * g.GD + dt * dt * g.GP;
  lhs.diagonal().array() += s.mass;
  const Vec rhs = s.mass * s.vel + dt * (g.GP * (desired - s.pos) + external_force);
  SimState next = s;
  next.vel = lhs.llt().solve(rhs);
  next.pos = s.pos + dt * next.vel;
  next.force = external_force;
  if (!next.pos.allFinite() || !next.vel.allFinite()) throw SimDiverged("simulation state is not finite");
  return next;
}

Vec VirtualWall::force(const Vec& x) const {
  const double d = normal.dot(x - point);
  if (d >= 0.0) return Vec::Zero(x.size());
  return (-d * stiffness) * normal;
}

double mechanical_energy(const SimState& state, const Mat& GP, const Vec& desired) {
  const Vec e = desired - state.pos;
  return 0.5 * state.mass * state.vel.squaredNorm() + 0.5 * e.dot(GP * e);
}

}  // namespace tpkmp
