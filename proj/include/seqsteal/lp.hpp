#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace seqsteal {

enum class RowSense { LessEqual, Equal, GreaterEqual };

/// minimize cost . x  subject to  A x (sense) rhs,  lower <= x <= upper.
/// Bounds may be infinite.
struct LinearProgram {
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  explicit LinearProgram(int num_vars)
      : cost(Eigen::VectorXd::Zero(num_vars)),
        lower(static_cast<std::size_t>(num_vars), 0.0),
        upper(static_cast<std::size_t>(num_vars), kInf),
        A(0, num_vars) {}

  int num_vars() const { return static_cast<int>(cost.size()); }
  int num_rows() const { return static_cast<int>(A.rows()); }

  void add_row(const Eigen::RowVectorXd& coef, RowSense s, double b);

  Eigen::VectorXd cost;
  std::vector<double> lower;
  std::vector<double> upper;
  Eigen::MatrixXd A;
  std::vector<RowSense> sense;
  std::vector<double> rhs;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
  int iterations = 0;
};

/// Two-phase dense simplex with bounded variables. Dantzig pricing, falling
/// back to Bland's rule while the objective stalls.
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace seqsteal
