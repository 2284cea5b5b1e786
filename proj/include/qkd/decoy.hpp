#pragma once

#include <vector>

#include "qkd/integrate.hpp"
#include "qkd/simplex.hpp"
#include "qkd/source.hpp"

namespace qkd {

// One (region-pair, basis) record: measured gain / error-gain with their
// integration errors, plus the Poisson region weights of both sides.
struct DecoyObservation {
  int bin_a = 0;
  int bin_b = 0;
  Basis basis = Basis::Z;
  Estimate gain;
  Estimate err_gain;
  RegionWeights weights_a;
  RegionWeights weights_b;
};

struct YieldBounds {
  double y11_lower = 0.0;   // Z-basis lower bound on Y11
  double ey11_upper = 0.0;  // X-basis upper bound on e11 Y11
  double e11_upper = 0.0;   // ey11_upper / (X-basis Y11 lower bound)
  bool feasible = true;
};

// Decoy linear program for one basis. Variables are the photon-number yields
// Y_nm in [0,1]; the X-basis program carries additional error-yield variables
// E_nm with 0 <= E_nm <= Y_nm. Each observation contributes
//   Q - k sigma - tail_slack <= sum w_a[n] w_b[m] Y_nm <= Q + k sigma
// with tail_slack = 1 - sum_{n,m<=N} w_a[n] w_b[m], and the same pattern for
// the error-gain rows.
struct DecoyLp {
  LinearProgram lp;
  int n_cut = 0;
  Basis basis = Basis::Z;

  int yield_index(int n, int m) const { return n * (n_cut + 1) + m; }
  int error_index(int n, int m) const {
    return (n_cut + 1) * (n_cut + 1) + yield_index(n, m);
  }
};

DecoyLp build_lp(const std::vector<DecoyObservation>& obs, int n_cut, double k_sigma = 3.0);

// Lower bound on Y11 from the Z program; upper bound on e11 Y11 and the
// derived e11 upper bound from the X program.
YieldBounds solve_bounds(const DecoyLp& z_lp, const DecoyLp& x_lp, double tol = 1e-9);

// Single-objective helpers (used by tests and the bracketing properties).
struct BoundResult {
  double value = 0.0;
  bool feasible = true;
};
BoundResult bound_yield(const DecoyLp& lp, int n, int m, bool maximize, double tol = 1e-9);
BoundResult bound_error_yield(const DecoyLp& lp, int n, int m, bool maximize, double tol = 1e-9);

}  // namespace qkd
