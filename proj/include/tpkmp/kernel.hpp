#pragma once

#include <string>

namespace tpkmp {

enum class KernelFamily { matern52, rbf };

struct KernelConfig {
  KernelFamily family = KernelFamily::matern52;
  double length_scale = 0.1;
  double signal_variance = 1.0;

  void validate() const;
};

/// k(a, b). Matern 5/2: s2 (1 + sqrt5 r/l + 5 r^2/(3 l^2)) exp(-sqrt5 r/l); RBF: s2 exp(-r^2/(2 l^2)).
double kernel_eval(const KernelConfig& k, double a, double b);
/// Same function evaluated in extended precision.
long double kernel_eval_ld(const KernelConfig& k, double a, double b);

std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& name);

}  // namespace tpkmp
