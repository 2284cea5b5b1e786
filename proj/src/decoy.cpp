#include "qkd/decoy.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd {

DecoyLp build_lp(const std::vector<DecoyObservation>& obs, int n_cut, double k_sigma) {
  if (obs.empty()) throw std::invalid_argument("build_lp: no observations");
  DecoyLp out;
  out.n_cut = n_cut;
  out.basis = obs.front().basis;
  const int ny = (n_cut + 1) * (n_cut + 1);
  const bool with_errors = out.basis == Basis::X;
  const int nv = with_errors ? 2 * ny : ny;

  int n_rows = int(obs.size()) * (with_errors ? 2 : 1) + (with_errors ? ny : 0);
  LinearProgram& lp = out.lp;
  lp.objective = Eigen::VectorXd::Zero(nv);
  lp.constraints = Eigen::MatrixXd::Zero(n_rows, nv);
  lp.row_lo.resize(n_rows);
  lp.row_hi.resize(n_rows);
  lp.var_lo = Eigen::VectorXd::Zero(nv);
  lp.var_hi = Eigen::VectorXd::Ones(nv);
  lp.var_names.reserve(std::size_t(nv));
  for (int n = 0; n <= n_cut; ++n)
    for (int m = 0; m <= n_cut; ++m)
      lp.var_names.push_back("Y_" + std::to_string(n) + std::to_string(m));
  if (with_errors)
    for (int n = 0; n <= n_cut; ++n)
      for (int m = 0; m <= n_cut; ++m)
        lp.var_names.push_back("E_" + std::to_string(n) + std::to_string(m));

  int row = 0;
  for (const DecoyObservation& o : obs) {
    if (o.basis != out.basis) throw std::invalid_argument("build_lp: mixed bases");
    if (int(o.weights_a.poisson.size()) < n_cut + 1 ||
        int(o.weights_b.poisson.size()) < n_cut + 1)
      throw std::invalid_argument("build_lp: weights shorter than n_cut");

    double covered = 0.0;
    for (int n = 0; n <= n_cut; ++n)
      for (int m = 0; m <= n_cut; ++m) {
        double w = o.weights_a.poisson[n] * o.weights_b.poisson[m];
        lp.constraints(row, out.yield_index(n, m)) = w;
        covered += w;
      }
    double slack = std::max(0.0, 1.0 - covered);
    lp.row_lo[row] = o.gain.value - k_sigma * o.gain.std_err - slack;
    lp.row_hi[row] = o.gain.value + k_sigma * o.gain.std_err;
    ++row;

    if (with_errors) {
      for (int n = 0; n <= n_cut; ++n)
        for (int m = 0; m <= n_cut; ++m)
          lp.constraints(row, out.error_index(n, m)) =
              o.weights_a.poisson[n] * o.weights_b.poisson[m];
      lp.row_lo[row] = o.err_gain.value - k_sigma * o.err_gain.std_err - slack;
      lp.row_hi[row] = o.err_gain.value + k_sigma * o.err_gain.std_err;
      ++row;
    }
  }
  if (with_errors) {
    for (int n = 0; n <= n_cut; ++n)
      for (int m = 0; m <= n_cut; ++m) {
        lp.constraints(row, out.error_index(n, m)) = 1.0;
        lp.constraints(row, out.yield_index(n, m)) = -1.0;
        lp.row_lo[row] = -kLpInf;
        lp.row_hi[row] = 0.0;  // E_nm <= Y_nm
        ++row;
      }
  }
  return out;
}

namespace {

BoundResult solve_for(const DecoyLp& dlp, int col, bool maximize, double tol) {
  LinearProgram lp = dlp.lp;
  lp.objective.setZero();
  lp.objective[col] = maximize ? -1.0 : 1.0;
  LpSolution s = solve_lp(lp, tol);
  BoundResult r;
  if (s.status == LpStatus::Optimal) {
    r.value = s.x[col];
  } else if (s.status == LpStatus::Infeasible) {
    r.feasible = false;
  } else {
    throw std::runtime_error("decoy LP: solver failed (unbounded or iteration limit)");
  }
  return r;
}

}  // namespace

BoundResult bound_yield(const DecoyLp& lp, int n, int m, bool maximize, double tol) {
  return solve_for(lp, lp.yield_index(n, m), maximize, tol);
}

BoundResult bound_error_yield(const DecoyLp& lp, int n, int m, bool maximize, double tol) {
  if (lp.basis != Basis::X) throw std::invalid_argument("error yields only in the X program");
  return solve_for(lp, lp.error_index(n, m), maximize, tol);
}

YieldBounds solve_bounds(const DecoyLp& z_lp, const DecoyLp& x_lp, double tol) {
  YieldBounds out;
  BoundResult y11 = bound_yield(z_lp, 1, 1, /*maximize=*/false, tol);
  BoundResult ey11 = bound_error_yield(x_lp, 1, 1, /*maximize=*/true, tol);
  BoundResult y11x = bound_yield(x_lp, 1, 1, /*maximize=*/false, tol);
  if (!y11.feasible || !ey11.feasible || !y11x.feasible) {
    out.feasible = false;
    return out;
  }
  out.y11_lower = y11.value;
  out.ey11_upper = ey11.value;
  out.e11_upper = y11x.value > tol ? std::min(1.0, ey11.value / y11x.value) : 1.0;
  return out;
}

}  // namespace qkd
