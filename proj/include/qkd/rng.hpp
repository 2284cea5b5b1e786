#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace qkd {

// SplitMix64 finalizer. Used both as a stream generator and as a stateless
// hash so that derived seeds and counter-based draws are reproducible
// independent of evaluation order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline double to_unit_double(std::uint64_t bits) {
  return double(bits >> 11) * 0x1.0p-53;  // [0, 1)
}

// Counter-based uniform: u(seed, index, dim) with no sequential state.
inline double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint32_t dim) {
  return to_unit_double(hash_combine(hash_combine(seed, index), dim));
}

// Additive Kronecker (R_d) low-discrepancy sequence: x_k = frac(shift + k*alpha)
// with alpha_i = phi_d^-(i+1), phi_d the positive root of x^(d+1) = x + 1.
// Randomized via Cranley-Patterson shifts per replicate.
class KroneckerSequence {
 public:
  KroneckerSequence(int dim, std::uint64_t shift_seed) : alpha_(dim), shift_(dim) {
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
    double a = 1.0;
    std::uint64_t s = shift_seed;
    for (int i = 0; i < dim; ++i) {
      a /= phi;
      alpha_[i] = a;
      shift_[i] = to_unit_double(splitmix64(s));
    }
  }

  void point(std::uint64_t k, double* out) const {
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      double v = shift_[i] + double(k + 1) * alpha_[i];
      out[i] = v - std::floor(v);
    }
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> shift_;
};

}  // namespace qkd
