#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "qkd/rng.hpp"
#include "qkd/simplex.hpp"

using namespace qkd;

namespace {

LinearProgram box_lp(int n, int m) {
  LinearProgram lp;
  lp.objective = Eigen::VectorXd::Zero(n);
  lp.constraints = Eigen::MatrixXd::Zero(m, n);
  lp.row_lo = Eigen::VectorXd::Constant(m, -kLpInf);
  lp.row_hi = Eigen::VectorXd::Constant(m, kLpInf);
  lp.var_lo = Eigen::VectorXd::Zero(n);
  lp.var_hi = Eigen::VectorXd::Ones(n);
  return lp;
}

// brute-force oracle for small box-constrained LPs: enumerate all candidate
// vertices (active sets of rows and variable bounds), keep feasible ones
double brute_force_min(const LinearProgram& lp, bool& feasible) {
  const int n = lp.n_vars(), m = lp.n_rows();
  std::vector<Eigen::VectorXd> planes;   // normal
  std::vector<double> offs;
  for (int r = 0; r < m; ++r) {
    if (std::isfinite(lp.row_lo[r])) planes.push_back(lp.constraints.row(r)), offs.push_back(lp.row_lo[r]);
    if (std::isfinite(lp.row_hi[r])) planes.push_back(lp.constraints.row(r)), offs.push_back(lp.row_hi[r]);
  }
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[j] = 1.0;
    planes.push_back(e), offs.push_back(lp.var_lo[j]);
    planes.push_back(e), offs.push_back(lp.var_hi[j]);
  }
  const int np = int(planes.size());
  double best = kLpInf;
  feasible = false;
  std::vector<int> pick(std::size_t(n), 0);
  // iterate all n-subsets of planes
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd a(n, n);
      Eigen::VectorXd b(n);
      for (int i = 0; i < n; ++i) {
        a.row(i) = planes[std::size_t(pick[std::size_t(i)])];
        b[i] = offs[std::size_t(pick[std::size_t(i)])];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (!lu.isInvertible()) return;
      Eigen::VectorXd x = lu.solve(b);
      for (int j = 0; j < n; ++j)
        if (x[j] < lp.var_lo[j] - 1e-9 || x[j] > lp.var_hi[j] + 1e-9) return;
      Eigen::VectorXd ax = lp.constraints * x;
      for (int r = 0; r < m; ++r)
        if (ax[r] < lp.row_lo[r] - 1e-9 || ax[r] > lp.row_hi[r] + 1e-9) return;
      feasible = true;
      best = std::min(best, lp.objective.dot(x));
      return;
    }
    for (int p = start; p < np; ++p) {
      pick[std::size_t(depth)] = p;
      rec(p + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("hand-solved two-variable problem") {
  // min -x - 2y  s.t. x + y <= 1, x, y in [0, 1]  -> x = 0, y = 1
  LinearProgram lp = box_lp(2, 1);
  lp.objective << -1.0, -2.0;
  lp.constraints << 1.0, 1.0;
  lp.row_hi[0] = 1.0;
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(s.x[0] == doctest::Approx(0.0));
  CHECK(s.x[1] == doctest::Approx(1.0));
}

TEST_CASE("ranged row pins a variable") {
  LinearProgram lp = box_lp(1, 1);
  lp.objective << 1.0;
  lp.constraints << 1.0;
  lp.row_lo[0] = 0.4;
  lp.row_hi[0] = 0.4;
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.x[0] == doctest::Approx(0.4).epsilon(1e-10));
}

TEST_CASE("infeasible rows are detected") {
  LinearProgram lp = box_lp(2, 2);
  lp.objective << 1.0, 0.0;
  lp.constraints << 1.0, 1.0, 1.0, 1.0;
  lp.row_lo[0] = 1.5;             // x + y >= 1.5
  lp.row_hi[1] = 1.0;             // x + y <= 1.0
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);

  // and contradictory range on one row
  LinearProgram lp2 = box_lp(1, 1);
  lp2.constraints << 1.0;
  lp2.row_lo[0] = 0.7;
  lp2.row_hi[0] = 0.2;
  CHECK(solve_lp(lp2).status == LpStatus::Infeasible);
}

TEST_CASE("unbounded problem is detected") {
  LinearProgram lp = box_lp(2, 1);
  lp.var_hi = Eigen::VectorXd::Constant(2, kLpInf);
  lp.objective << -1.0, 0.0;
  lp.constraints << 0.0, 1.0;
  lp.row_hi[0] = 1.0;
  CHECK(solve_lp(lp).status == LpStatus::Unbounded);
}

TEST_CASE("degenerate equality stack") {
  // several identical rows should not cycle
  LinearProgram lp = box_lp(3, 4);
  lp.objective << 1.0, 1.0, -1.0;
  for (int r = 0; r < 4; ++r) {
    lp.constraints.row(r) << 1.0, 1.0, 1.0;
    lp.row_lo[r] = 1.0;
    lp.row_hi[r] = 1.0;
  }
  LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("random small problems match vertex enumeration") {
  std::uint64_t st = 77;
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    int n = 2 + int(splitmix64(st) % 3);  // 2..4 variables
    int m = 1 + int(splitmix64(st) % 3);
    LinearProgram lp = box_lp(n, m);
    for (int j = 0; j < n; ++j) lp.objective[j] = 2.0 * to_unit_double(splitmix64(st)) - 1.0;
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j)
        lp.constraints(r, j) = 2.0 * to_unit_double(splitmix64(st)) - 1.0;
      double a = 2.0 * to_unit_double(splitmix64(st)) - 1.0;
      double b = a + to_unit_double(splitmix64(st));
      lp.row_lo[r] = a;
      lp.row_hi[r] = b;
    }
    bool feasible = false;
    double truth = brute_force_min(lp, feasible);
    LpSolution s = solve_lp(lp);
    if (!feasible) {
      CHECK(s.status == LpStatus::Infeasible);
      continue;
    }
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(s.objective == doctest::Approx(truth).epsilon(1e-7));
    ++solved;
  }
  CHECK(solved > 20);  // make sure the generator is not degenerate
}

TEST_CASE("text rendering is line oriented") {
  LinearProgram lp = box_lp(2, 1);
  lp.objective << 1.0, -1.0;
  lp.constraints << 0.5, 0.25;
  lp.row_lo[0] = 0.1;
  lp.row_hi[0] = 0.9;
  lp.var_names = {"Y_00", "Y_01"};
  std::string text = lp_to_text(lp);
  CHECK(text.find("minimize") != std::string::npos);
  CHECK(text.find("subject to") != std::string::npos);
  CHECK(text.find("Y_01") != std::string::npos);
  CHECK(text.find("0.1") != std::string::npos);
}
