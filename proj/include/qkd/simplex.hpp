#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

namespace qkd {

constexpr double kLpInf = std::numeric_limits<double>::infinity();

// minimize c.x  subject to  row_lo <= A x <= row_hi,  var_lo <= x <= var_hi
struct LinearProgram {
  Eigen::VectorXd objective;          // n
  Eigen::MatrixXd constraints;        // m x n, dense
  Eigen::VectorXd row_lo, row_hi;     // m
  Eigen::VectorXd var_lo, var_hi;     // n
  std::vector<std::string> var_names;  // optional, for text dumps

  int n_vars() const { return int(objective.size()); }
  int n_rows() const { return int(constraints.rows()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
};

// Dense two-phase simplex with bounded variables (nonbasic variables rest on
// either bound; the ratio test allows bound flips). Suited to the small dense
// problems this project produces (tens to hundreds of variables).
LpSolution solve_lp(const LinearProgram& lp, double tol = 1e-9, int max_iter = 20000);

// Line-oriented "minimize / subject to" rendering for external cross-checks.
std::string lp_to_text(const LinearProgram& lp);

}  // namespace qkd
