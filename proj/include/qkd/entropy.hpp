#pragma once

#include <cmath>

namespace qkd {

// Binary Shannon entropy H2(x) = -x log2 x - (1-x) log2(1-x), with
// H2(0) = H2(1) = 0. Inputs outside [0,1] are clamped.
inline double binary_entropy(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

inline double log_factorial(int n) { return std::lgamma(double(n) + 1.0); }

// Poisson pmf e^{-mu} mu^n / n!, stable for large n via logs.
inline double poisson_pmf(double mu, int n) {
  if (mu < 0.0 || n < 0) return 0.0;
  if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-mu + n * std::log(mu) - log_factorial(n));
}

}  // namespace qkd
