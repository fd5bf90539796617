#include "seqsteal/lp.hpp"

#include <algorithm>
#include <cmath>

#include "seqsteal/errors.hpp"

namespace seqsteal {

void LinearProgram::add_row(const Eigen::RowVectorXd& coef, RowSense s, double b) {
  if (coef.size() != num_vars()) throw ParameterError("LP row has wrong width");
  A.conservativeResize(A.rows() + 1, Eigen::NoChange);
  A.row(A.rows() - 1) = coef;
  sense.push_back(s);
  rhs.push_back(b);
}

namespace {

constexpr double kInf = LinearProgram::kInf;
constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-11;

// How an original variable is expressed through standard-form columns:
// x = offset + sign * y[col]  (plus  - y[col2]  for free variables).
struct VarMap {
  double offset = 0.0;
  double sign = 1.0;
  int col = -1;
  int col2 = -1;
};

struct Tableau {
  Eigen::MatrixXd tab;        // B^{-1} A over all columns
  Eigen::VectorXd x_basic;    // values of basic variables
  std::vector<int> basis;     // column index per row
  std::vector<bool> is_basic;
  std::vector<bool> at_upper;
  std::vector<double> ub;
  int iterations = 0;
};

// Runs simplex iterations for `cost` until optimal. Returns the final status.
LpStatus iterate(Tableau& tb, const Eigen::VectorXd& cost, int max_iterations) {
  const int m = static_cast<int>(tb.tab.rows());
  const int n = static_cast<int>(tb.tab.cols());
  int stalled = 0;
  Eigen::VectorXd cb(m);
  Eigen::VectorXd d;
  int since_refresh = 0;
  while (tb.iterations < max_iterations) {
    // Reduced costs are updated with each pivot and recomputed now and then.
    if (since_refresh++ % 64 == 0) {
      for (int i = 0; i < m; ++i) cb[i] = cost[tb.basis[static_cast<std::size_t>(i)]];
      d = cost - tb.tab.transpose() * cb;
    }
    const bool bland = stalled > 50;
    int enter = -1;
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (tb.is_basic[uj] || tb.ub[uj] <= 0.0) continue;
      double gain = tb.at_upper[uj] ? d[j] : -d[j];
      if (gain <= kCostTol) continue;
      if (bland) {
        enter = j;
        break;
      }
      if (gain > best) {
        best = gain;
        enter = j;
      }
    }
    if (enter < 0) return LpStatus::Optimal;
    const auto ue = static_cast<std::size_t>(enter);
    const double dir = tb.at_upper[ue] ? -1.0 : 1.0;

    double theta = tb.ub[ue];
    int leave_row = -1;
    bool leave_to_upper = false;
    for (int i = 0; i < m; ++i) {
      const double rate = -dir * tb.tab(i, enter);
      const auto bi = static_cast<std::size_t>(tb.basis[static_cast<std::size_t>(i)]);
      double limit = kInf;
      bool to_upper = false;
      if (rate < -kPivotTol) {
        limit = std::max(0.0, tb.x_basic[i]) / -rate;
      } else if (rate > kPivotTol && std::isfinite(tb.ub[bi])) {
        limit = std::max(0.0, tb.ub[bi] - tb.x_basic[i]) / rate;
        to_upper = true;
      } else {
        continue;
      }
      if (limit < theta - 1e-15 ||
          (leave_row >= 0 && std::abs(limit - theta) <= 1e-15 && tb.basis[static_cast<std::size_t>(i)] < tb.basis[static_cast<std::size_t>(leave_row)])) {
        theta = limit;
        leave_row = i;
        leave_to_upper = to_upper;
      }
    }
    if (!std::isfinite(theta)) return LpStatus::Unbounded;
    stalled = theta > 1e-12 ? 0 : stalled + 1;
    ++tb.iterations;

    for (int i = 0; i < m; ++i) tb.x_basic[i] += -dir * tb.tab(i, enter) * theta;
    if (leave_row < 0) {
      tb.at_upper[ue] = !tb.at_upper[ue];
      continue;
    }
    const double entering_value = dir > 0 ? theta : tb.ub[ue] - theta;
    const auto leaving = static_cast<std::size_t>(tb.basis[static_cast<std::size_t>(leave_row)]);
    const double pivot = tb.tab(leave_row, enter);
    tb.tab.row(leave_row) /= pivot;
    for (int i = 0; i < m; ++i) {
      if (i == leave_row) continue;
      const double f = tb.tab(i, enter);
      if (f != 0.0) tb.tab.row(i) -= f * tb.tab.row(leave_row);
    }
    d -= d[enter] * tb.tab.row(leave_row).transpose();
    tb.is_basic[leaving] = false;
    tb.at_upper[leaving] = leave_to_upper;
    tb.is_basic[ue] = true;
    tb.at_upper[ue] = false;
    tb.basis[static_cast<std::size_t>(leave_row)] = enter;
    tb.x_basic[leave_row] = entering_value;
    for (int i = 0; i < m; ++i) {
      if (tb.x_basic[i] < 0.0 && tb.x_basic[i] > -1e-12) tb.x_basic[i] = 0.0;
    }
  }
  return LpStatus::IterationLimit;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const int nv = lp.num_vars();
  const int m = lp.num_rows();
  for (int j = 0; j < nv; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (lp.lower[uj] > lp.upper[uj]) return {LpStatus::Infeasible, 0.0, {}, 0};
  }

  // Standard form: columns y >= 0 with optional upper bounds.
  std::vector<VarMap> vars(static_cast<std::size_t>(nv));
  std::vector<double> ub;
  std::vector<double> cost;
  for (int j = 0; j < nv; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const double lo = lp.lower[uj];
    const double hi = lp.upper[uj];
    VarMap& vm = vars[uj];
    if (std::isfinite(lo)) {
      vm = {lo, 1.0, static_cast<int>(ub.size()), -1};
      ub.push_back(hi - lo);
      cost.push_back(lp.cost[j]);
    } else if (std::isfinite(hi)) {
      vm = {hi, -1.0, static_cast<int>(ub.size()), -1};
      ub.push_back(kInf);
      cost.push_back(-lp.cost[j]);
    } else {
      vm = {0.0, 1.0, static_cast<int>(ub.size()), static_cast<int>(ub.size()) + 1};
      ub.push_back(kInf);
      ub.push_back(kInf);
      cost.push_back(lp.cost[j]);
      cost.push_back(-lp.cost[j]);
    }
  }
  const int ny = static_cast<int>(ub.size());
  int num_slack = 0;
  for (auto s : lp.sense) num_slack += s != RowSense::Equal;
  const int n_struct = ny + num_slack;
  const int n_total = n_struct + m;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n_total);
  Eigen::VectorXd b(m);
  int slack = ny;
  for (int i = 0; i < m; ++i) {
    double r = lp.rhs[static_cast<std::size_t>(i)];
    for (int j = 0; j < nv; ++j) {
      const double a = lp.A(i, j);
      if (a == 0.0) continue;
      const VarMap& vm = vars[static_cast<std::size_t>(j)];
      r -= a * vm.offset;
      A(i, vm.col) += a * vm.sign;
      if (vm.col2 >= 0) A(i, vm.col2) -= a;
    }
    const auto s = lp.sense[static_cast<std::size_t>(i)];
    if (s == RowSense::LessEqual) A(i, slack++) = 1.0;
    if (s == RowSense::GreaterEqual) A(i, slack++) = -1.0;
    b[i] = r;
  }
  for (int k = 0; k < num_slack; ++k) {
    ub.push_back(kInf);
    cost.push_back(0.0);
  }

  // Row then column equilibration of the structural part.
  for (int i = 0; i < m; ++i) {
    double s = A.row(i).head(n_struct).cwiseAbs().maxCoeff();
    if (s > 0.0) {
      A.row(i).head(n_struct) /= s;
      b[i] /= s;
    }
    if (b[i] < 0.0) {
      A.row(i).head(n_struct) *= -1.0;
      b[i] = -b[i];
    }
  }
  std::vector<double> col_scale(static_cast<std::size_t>(n_struct), 1.0);
  for (int j = 0; j < n_struct; ++j) {
    double s = A.col(j).cwiseAbs().maxCoeff();
    if (s > 0.0) {
      A.col(j) /= s;
      col_scale[static_cast<std::size_t>(j)] = s;
      ub[static_cast<std::size_t>(j)] *= s;
      cost[static_cast<std::size_t>(j)] /= s;
    }
  }
  for (int i = 0; i < m; ++i) A(i, n_struct + i) = 1.0;
  for (int i = 0; i < m; ++i) {
    ub.push_back(kInf);
    cost.push_back(0.0);
  }

  Tableau tb;
  tb.tab = A;
  tb.x_basic = b;
  tb.basis.resize(static_cast<std::size_t>(m));
  tb.is_basic.assign(static_cast<std::size_t>(n_total), false);
  tb.at_upper.assign(static_cast<std::size_t>(n_total), false);
  tb.ub = ub;
  // Crash basis: a row whose structural columns include a positive unit
  // column starts with that column basic and its artificial fixed at zero.
  std::vector<int> nonzeros(static_cast<std::size_t>(n_struct), 0);
  for (int j = 0; j < n_struct; ++j) nonzeros[static_cast<std::size_t>(j)] = static_cast<int>((A.col(j).array() != 0.0).count());
  int crashed = 0;
  for (int i = 0; i < m; ++i) {
    int pick = n_struct + i;
    for (int j = 0; j < n_struct; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (nonzeros[uj] != 1 || !(A(i, j) > 0.0) || tb.is_basic[uj]) continue;
      if (b[i] / A(i, j) > ub[uj]) continue;
      pick = j;
      break;
    }
    if (pick < n_struct) {
      tb.x_basic[i] = b[i] / A(i, pick);
      tb.tab.row(i) /= A(i, pick);
      tb.ub[static_cast<std::size_t>(n_struct + i)] = 0.0;
      ++crashed;
    }
    tb.basis[static_cast<std::size_t>(i)] = pick;
    tb.is_basic[static_cast<std::size_t>(pick)] = true;
  }
  const int max_iterations = 50 * (m + n_total) + 1000;

  LpSolution out;
  if (m > crashed) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_total);
    phase1.tail(m).setOnes();
    LpStatus st = iterate(tb, phase1, max_iterations);
    if (st == LpStatus::IterationLimit) {
      out.status = st;
      out.iterations = tb.iterations;
      return out;
    }
    double infeas = 0.0;
    for (int i = 0; i < m; ++i) {
      if (tb.basis[static_cast<std::size_t>(i)] >= n_struct) infeas += tb.x_basic[i];
    }
    if (infeas > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
      out.status = LpStatus::Infeasible;
      out.iterations = tb.iterations;
      return out;
    }
    for (int i = 0; i < m; ++i) {
      tb.ub[static_cast<std::size_t>(n_struct + i)] = 0.0;
      if (tb.basis[static_cast<std::size_t>(i)] >= n_struct) tb.x_basic[i] = 0.0;
    }
  }
  Eigen::VectorXd phase2 = Eigen::Map<Eigen::VectorXd>(cost.data(), n_total);
  LpStatus st = iterate(tb, phase2, max_iterations);
  out.iterations = tb.iterations;
  if (st != LpStatus::Optimal) {
    out.status = st;
    return out;
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_total);
  for (int j = 0; j < n_total; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (!tb.is_basic[uj] && tb.at_upper[uj]) y[j] = tb.ub[uj];
  }
  for (int i = 0; i < m; ++i) y[tb.basis[static_cast<std::size_t>(i)]] = tb.x_basic[i];
  for (int j = 0; j < n_struct; ++j) y[j] /= col_scale[static_cast<std::size_t>(j)];

  out.x.resize(nv);
  for (int j = 0; j < nv; ++j) {
    const VarMap& vm = vars[static_cast<std::size_t>(j)];
    double v = vm.offset + vm.sign * y[vm.col];
    if (vm.col2 >= 0) v -= y[vm.col2];
    v = std::clamp(v, lp.lower[static_cast<std::size_t>(j)], lp.upper[static_cast<std::size_t>(j)]);
    out.x[j] = v;
  }
  out.objective = lp.cost.dot(out.x);
  out.status = LpStatus::Optimal;
  return out;
}

}  // namespace seqsteal
