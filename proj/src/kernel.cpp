#include "tpkmp/kernel.hpp"

#include <cmath>

#include "tpkmp/errors.hpp"

namespace tpkmp {

void KernelConfig::validate() const {
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
    throw ValidationError("kernel length scale must be positive");
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw ValidationError("kernel signal variance must be positive");
  }
}

double kernel_eval(const KernelConfig& k, double a, double b) {
  const double r = std::abs(a - b);
  switch (k.family) {
    case KernelFamily::matern52: {
      static const double sqrt5 = std::sqrt(5.0);
      const double q = sqrt5 * r / k.length_scale;
      return k.signal_variance * (1.0 + q + q * q / 3.0) * std::exp(-q);
    }
    case KernelFamily::rbf: {
      const double q = r / k.length_scale;
      return k.signal_variance * std::exp(-0.5 * q * q);
    }
  }
  return 0.0;
}

long double kernel_eval_ld(const KernelConfig& k, double a, double b) {
  const long double r = std::abs(static_cast<long double>(a) - static_cast<long double>(b));
  const long double l = k.length_scale;
  const long double s2 = k.signal_variance;
  switch (k.family) {
    case KernelFamily::matern52: {
      const long double q = std::sqrt(5.0L) * r / l;
      return s2 * (1.0L + q + q * q / 3.0L) * std::exp(-q);
    }
    case KernelFamily::rbf: {
      const long double q = r / l;
      return s2 * std::exp(-0.5L * q * q);
    }
  }
  return 0.0L;
}

std::string to_string(KernelFamily f) { return f == KernelFamily::rbf ? "rbf" : "matern52"; }

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "matern52") return KernelFamily::matern52;
  if (name == "rbf") return KernelFamily::rbf;
  throw ValidationError("unknown kernel family '" + name + "'");
}

}  // namespace tpkmp
