#pragma once

#include <memory>
#include <span>
#include <vector>

#include "tpkmp/gmm.hpp"
#include "tpkmp/kernel.hpp"
#include "tpkmp/linalg.hpp"

namespace tpkmp {

struct KmpHyper {
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  double alpha = 1.0;

  void validate() const;
};

/// Output of one KMP query. cov_ep and cov_al are the epistemic and aleatoric
/// parts of the covariance; for alpha = 1 they add up to cov.
struct Prediction {
  Vec mean;
  Mat cov;
  Mat cov_ep;
  Mat cov_al;
};

struct InsertResult {
  Index index;
  bool replaced;
};

/// Kernelized movement primitive over a scalar input.
///
/// The Gram matrix is K = G (x) I_O with state index n*O + a, so K^{-1} is always
/// applied through the N x N factor of G. The regularized systems K + lambda Sigma
/// are factored as full N*O systems unless every Sigma_n is isotropic, in which
/// case they reduce to N x N systems shared by all output dimensions.
///
/// Copies are cheap: the factorizations live behind a shared immutable cache.
/// Mutation (insert_via_point) drops the cache; predict on a stale KMP throws
/// ContractViolation until rebuild() is called.
class Kmp {
 public:
  /// Replace radius is half the grid spacing of `ref`.
  Kmp(ReferenceDistribution ref, KernelConfig kernel, KmpHyper hyper);
  Kmp(ReferenceDistribution ref, KernelConfig kernel, KmpHyper hyper, double replace_radius,
      bool build = true);

  const ReferenceDistribution& reference() const noexcept { return ref_; }
  const KernelConfig& kernel() const noexcept { return kernel_; }
  const KmpHyper& hyper() const noexcept { return hyper_; }
  double replace_radius() const noexcept { return replace_radius_; }
  Index output_dim() const { return ref_.output_dim(); }
  bool cache_valid() const noexcept { return cache_ != nullptr; }
  /// True when the isotropic N x N path is in use.
  bool isotropic() const;

  Prediction predict(double s) const;
  std::vector<Prediction> predict_batch(std::span<const double> s, Exec exec = Exec::parallel) const;

  /// Inserts {s, mu, sigma} keeping inputs sorted, or replaces the nearest entry
  /// when one lies closer than the replace radius (ties go to the lower index).
  /// Leaves the cache stale.
  InsertResult insert_via_point(const RefEntry& vp);
  /// insert_via_point followed by rebuild().
  InsertResult add_via_point(const RefEntry& vp);
  void rebuild();

  /// Scalar Gram matrix G over the reference inputs.
  Mat scalar_gram() const;
  /// Full N*O Gram, G (x) I_O.
  Mat full_gram() const;

  struct Cache;

 private:
  ReferenceDistribution ref_;
  KernelConfig kernel_;
  KmpHyper hyper_;
  double replace_radius_;
  std::shared_ptr<const Cache> cache_;
};

/// Half the mean spacing of the reference inputs (0 for a single entry).
double default_replace_radius(const ReferenceDistribution& ref);

/// True when every covariance is a multiple of the identity.
bool all_isotropic(const ReferenceDistribution& ref);

}  // namespace tpkmp
