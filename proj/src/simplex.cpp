#include "qkd/simplex.hpp"

#include <Eigen/LU>
#include <cmath>
#include <sstream>

namespace qkd {

namespace {

enum class VarState { AtLower, AtUpper, Basic };

struct Worker {
  int m, n_struct, n_total;     // rows, structural+slack columns, + artificials
  Eigen::MatrixXd cols;         // m x n_total
  Eigen::VectorXd lo, hi, val;  // per column
  std::vector<VarState> state;
  std::vector<int> basis;       // size m
  Eigen::MatrixXd binv;         // m x m
  double tol;

  double reduced_cost(const Eigen::VectorXd& dual, const Eigen::VectorXd& cost, int j) const {
    return cost[j] - dual.dot(cols.col(j));
  }

  void refactor() {
    Eigen::MatrixXd b(m, m);
    for (int i = 0; i < m; ++i) b.col(i) = cols.col(basis[i]);
    binv = b.fullPivLu().inverse();
    recompute_basics();
  }

  void recompute_basics() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < n_total; ++j)
      if (state[j] != VarState::Basic && val[j] != 0.0) rhs -= cols.col(j) * val[j];
    Eigen::VectorXd xb = binv * rhs;
    for (int i = 0; i < m; ++i) val[basis[i]] = xb[i];
  }

  // One simplex phase. Returns Optimal / Unbounded / IterationLimit.
  LpStatus run(const Eigen::VectorXd& cost, int max_iter) {
    int stall = 0;
    for (int iter = 0; iter < max_iter; ++iter) {
      if (iter % 64 == 63) refactor();
      Eigen::VectorXd cb(m);
      for (int i = 0; i < m; ++i) cb[i] = cost[basis[i]];
      Eigen::VectorXd dual = binv.transpose() * cb;

      // pricing: Dantzig; Bland after stalling
      const bool bland = stall > 2 * (m + n_total);
      int enter = -1;
      double best = tol;
      int dir = +1;
      for (int j = 0; j < n_total; ++j) {
        if (state[j] == VarState::Basic || hi[j] - lo[j] <= 0.0) continue;
        double d = reduced_cost(dual, cost, j);
        if (state[j] == VarState::AtLower && d < -tol) {
          if (bland) { enter = j; dir = +1; break; }
          if (-d > best) { best = -d; enter = j; dir = +1; }
        } else if (state[j] == VarState::AtUpper && d > tol) {
          if (bland) { enter = j; dir = -1; break; }
          if (d > best) { best = d; enter = j; dir = -1; }
        }
      }
      if (enter < 0) return LpStatus::Optimal;

      Eigen::VectorXd w = binv * cols.col(enter);
      // basic values move as val_B(t) = val_B - t*dir*w
      double t_max = hi[enter] - lo[enter];
      int leave = -1;  // index into basis; -1 = bound flip
      for (int i = 0; i < m; ++i) {
        double g = dir * w[i];
        double t;
        if (g > tol)
          t = (val[basis[i]] - lo[basis[i]]) / g;
        else if (g < -tol)
          t = (hi[basis[i]] - val[basis[i]]) / (-g);
        else
          continue;
        if (t < t_max - 1e-15 || (t < t_max + 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
          t_max = std::max(0.0, t);
          leave = i;
        }
      }
      if (std::isinf(t_max)) return LpStatus::Unbounded;
      stall = t_max < 1e-13 ? stall + 1 : 0;

      for (int i = 0; i < m; ++i) val[basis[i]] -= t_max * dir * w[i];
      if (leave < 0) {
        // entering variable runs to its opposite bound
        state[enter] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
        val[enter] = dir > 0 ? hi[enter] : lo[enter];
        continue;
      }
      int out = basis[leave];
      double g = dir * w[leave];
      state[out] = g > 0.0 ? VarState::AtLower : VarState::AtUpper;
      val[out] = g > 0.0 ? lo[out] : hi[out];
      val[enter] = (dir > 0 ? lo[enter] : hi[enter]) + dir * t_max;
      state[enter] = VarState::Basic;
      basis[leave] = enter;

      // product-form update of binv
      double alpha = w[leave];
      Eigen::RowVectorXd pivot_row = binv.row(leave) / alpha;
      for (int i = 0; i < m; ++i) {
        if (i == leave) continue;
        binv.row(i) -= w[i] * pivot_row;
      }
      binv.row(leave) = pivot_row;
    }
    return LpStatus::IterationLimit;
  }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, double tol, int max_iter) {
  const int n = lp.n_vars(), m = lp.n_rows();
  LpSolution sol;
  for (int j = 0; j < n; ++j)
    if (lp.var_lo[j] > lp.var_hi[j] + tol) return sol;
  for (int r = 0; r < m; ++r)
    if (lp.row_lo[r] > lp.row_hi[r] + tol) return sol;

  Worker wk;
  wk.m = m;
  wk.n_struct = n + m;
  wk.n_total = n + 2 * m;
  wk.tol = tol;
  wk.cols = Eigen::MatrixXd::Zero(m, wk.n_total);
  wk.cols.leftCols(n) = lp.constraints;
  wk.lo.resize(wk.n_total);
  wk.hi.resize(wk.n_total);
  wk.val.resize(wk.n_total);
  wk.state.assign(std::size_t(wk.n_total), VarState::AtLower);
  for (int j = 0; j < n; ++j) {
    wk.lo[j] = lp.var_lo[j];
    wk.hi[j] = lp.var_hi[j];
  }
  for (int r = 0; r < m; ++r) {
    wk.cols(r, n + r) = -1.0;  // slack: A x - s = 0 with s in [row_lo, row_hi]
    wk.lo[n + r] = lp.row_lo[r];
    wk.hi[n + r] = lp.row_hi[r];
  }
  // start nonbasic variables at a finite bound
  for (int j = 0; j < wk.n_struct; ++j) {
    if (std::isfinite(wk.lo[j]))
      wk.val[j] = wk.lo[j];
    else if (std::isfinite(wk.hi[j])) {
      wk.val[j] = wk.hi[j];
      wk.state[j] = VarState::AtUpper;
    } else
      wk.val[j] = 0.0;
  }
  // artificial basis absorbing the initial residual of A x - s = 0
  Eigen::VectorXd resid = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < wk.n_struct; ++j)
    if (wk.val[j] != 0.0) resid -= wk.cols.col(j) * wk.val[j];
  wk.basis.resize(m);
  for (int r = 0; r < m; ++r) {
    int a = wk.n_struct + r;
    wk.cols(r, a) = resid[r] >= 0.0 ? 1.0 : -1.0;
    wk.lo[a] = 0.0;
    wk.hi[a] = kLpInf;
    wk.val[a] = std::abs(resid[r]);
    wk.state[a] = VarState::Basic;
    wk.basis[r] = a;
  }
  wk.binv = Eigen::MatrixXd::Identity(m, m);
  for (int r = 0; r < m; ++r) wk.binv(r, r) = wk.cols(r, wk.n_struct + r);  // D^-1 = D

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(wk.n_total);
  phase1.tail(m).setOnes();
  LpStatus st = wk.run(phase1, max_iter);
  if (st == LpStatus::IterationLimit) {
    sol.status = st;
    return sol;
  }
  double infeas = 0.0;
  for (int r = 0; r < m; ++r) infeas += wk.val[wk.n_struct + r];
  if (infeas > 1e3 * tol) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }
  for (int r = 0; r < m; ++r) {  // lock artificials at zero
    int a = wk.n_struct + r;
    wk.hi[a] = 0.0;
    if (wk.state[a] != VarState::Basic) wk.val[a] = 0.0;
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(wk.n_total);
  phase2.head(n) = lp.objective;
  st = wk.run(phase2, max_iter);
  if (st != LpStatus::Optimal) {
    sol.status = st;
    return sol;
  }
  sol.status = LpStatus::Optimal;
  sol.x = wk.val.head(n);
  sol.objective = lp.objective.dot(sol.x);
  return sol;
}

std::string lp_to_text(const LinearProgram& lp) {
  std::ostringstream os;
  os.precision(17);
  auto name = [&](int j) {
    return lp.var_names.empty() ? "x" + std::to_string(j) : lp.var_names[std::size_t(j)];
  };
  os << "minimize\n ";
  for (int j = 0; j < lp.n_vars(); ++j)
    if (lp.objective[j] != 0.0) os << " + " << lp.objective[j] << " " << name(j);
  os << "\nsubject to\n";
  for (int r = 0; r < lp.n_rows(); ++r) {
    os << " " << lp.row_lo[r] << " <=";
    for (int j = 0; j < lp.n_vars(); ++j)
      if (lp.constraints(r, j) != 0.0) os << " + " << lp.constraints(r, j) << " " << name(j);
    os << " <= " << lp.row_hi[r] << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < lp.n_vars(); ++j)
    os << " " << lp.var_lo[j] << " <= " << name(j) << " <= " << lp.var_hi[j] << "\n";
  return os.str();
}

}  // namespace qkd
