#pragma once

#include "tpkmp/linalg.hpp"
#include "tpkmp/tp_model.hpp"

namespace tpkmp {

struct StiffnessConfig {
  double c1 = 5e3;
  double c2 = 1.5e-3;
  double delta_ep = 1e3;
  double delta_al = 1.0;
  double reg = 1.5e-3;
  double g_max = 2000.0;

  void validate() const;
};

struct Gains {
  Mat GP;
  Mat GD;
  double w1 = 0.0;
};

struct SimState {
  Vec pos;
  Vec vel;
  Vec force;  // external force applied during the last step
  double t = 0.0;
  double mass = 1.0;
};

/// 1 / (1 + exp(-c1 (sigma2_ep - c2))).
double sigmoid_weight(const StiffnessConfig& cfg, double sigma2_ep);

/// tr(Sigma_ep) / O.
double epistemic_variance(const Mat& cov_ep);

/// Uncertainty-aware stiffness:
///   G_P = w1 (delta_ep Sigma_ep + reg I)^{-1} + w2 (delta_al Sigma_al + reg I)^{-1},
/// eigenvalues clamped at g_max, G_D = 2 sqrt(mass) sqrtm(G_P).
Gains compute_gains(const StiffnessConfig& cfg, const Mat& cov_ep, const Mat& cov_al, double mass = 1.0);
Gains compute_gains(const StiffnessConfig& cfg, const FusedPrediction& pred, double mass = 1.0);

/// Baseline gains from the full covariance, G_P = (cov + reg I)^{-1}, same clamp and damping.
/// w1 is reported from the epistemic part for comparison only.
Gains raw_gains(const StiffnessConfig& cfg, const Mat& cov, const Mat& cov_ep, double mass = 1.0);

/// One control step of the impedance-controlled point mass,
/// m a = G_P (desired - x) - G_D v + F_ext.
/// Spring and damper are taken at the new velocity (linearly implicit Euler), then
/// x += dt v. Stable and dissipative for any PD gains.
SimState step(const SimState& state, const Gains& gains, const Vec& desired, const Vec& external_force, double dt);

/// Half-space obstacle: free where normal . (x - point) >= 0. Penetration depth d
/// produces the penalty force stiffness * d * normal.
struct VirtualWall {
  Vec point;
  Vec normal;  // unit
  double stiffness = 1e4;

  Vec force(const Vec& x) const;
};

/// 0.5 m |v|^2 + 0.5 (desired - x)^T G_P (desired - x).
double mechanical_energy(const SimState& state, const Mat& GP, const Vec& desired);

}  // namespace tpkmp
