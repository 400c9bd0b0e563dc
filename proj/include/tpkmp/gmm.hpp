#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpkmp/gaussian.hpp"
#include "tpkmp/linalg.hpp"

namespace tpkmp {

enum class Exec { serial, parallel };

/// One recorded demonstration. `inputs` are normalized time in [0, 1]; row h of
/// `outputs` is the end-effector position at inputs[h]. `frames` holds the pose of
/// every task frame during this demonstration (may be empty for frame-less data).
struct Demonstration {
  std::vector<double> inputs;
  Mat outputs;  // H x O
  double duration_s = 1.0;
  std::vector<FramePose> frames;

  Index length() const noexcept { return static_cast<Index>(inputs.size()); }
  Index output_dim() const noexcept { return outputs.cols(); }
  void validate() const;
};

struct GaussianMixture {
  Vec weights;
  std::vector<Gaussian> components;

  Index size() const noexcept { return weights.size(); }
  Index dim() const { return components.front().dim(); }
  void validate() const;
};

/// One input-indexed Gaussian of a reference trajectory distribution.
struct RefEntry {
  double s;
  Vec mu;
  Mat sigma;
};

/// Sorted sequence {s_n, mu_n, Sigma_n}.
struct ReferenceDistribution {
  std::vector<RefEntry> entries;

  Index size() const noexcept { return static_cast<Index>(entries.size()); }
  Index output_dim() const { return entries.front().mu.size(); }
  void validate() const;
};

struct EmOptions {
  int max_iterations = 200;
  /// Stop once (ll_k - ll_{k-1}) / |ll_{k-1}| < rel_tol. Negative disables the test.
  double rel_tol = 1e-8;
};

struct GmmFit {
  GaussianMixture mixture;
  /// Log-likelihood of the data under the parameters entering each E-step.
  std::vector<double> log_likelihood;
  int iterations = 0;
};

/// EM on the rows of `points` (n x D). k-means++ seeding with `seed`, one hard
/// moment-matching step, then EM with an eigenvalue floor on every covariance.
GmmFit fit_gmm_points(const Mat& points, int k, std::uint64_t seed, const EmOptions& opts = {},
                      Exec exec = Exec::parallel);

/// Pools the joint samples (s, xi) of all demos and fits a K-component GMM.
GmmFit fit_gmm(std::span<const Demonstration> demos, int k, std::uint64_t seed,
               const EmOptions& opts = {}, Exec exec = Exec::parallel);

/// Joint (s, xi) samples of all demos stacked row-wise.
Mat joint_points(std::span<const Demonstration> demos);

/// Conditional xi | s for every query (mixture input is its first coordinate),
/// moment matched to one Gaussian per query.
ReferenceDistribution gmr(const GaussianMixture& mixture, std::span<const double> queries,
                          Exec exec = Exec::parallel);

/// N equally spaced values on [0, s_max].
std::vector<double> make_inputs(Index n, double s_max);

}  // namespace tpkmp
