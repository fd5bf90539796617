#include "seqsteal/spanner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqsteal/errors.hpp"
#include "seqsteal/linalg.hpp"
#include "seqsteal/lp.hpp"

namespace seqsteal {

namespace {

constexpr double kSwapThreshold = 2.0 + 1e-9;
constexpr double kConditionWarning = 1e12;

double log_abs_det(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) s += std::log(std::abs(packed(i, i)));
  return s;
}

std::vector<int> all_indices(Eigen::Index n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

SpannerResult exact_spanner(const Eigen::MatrixXd& vectors) {
  const Eigen::Index d = vectors.rows();
  const Eigen::Index n = vectors.cols();
  SpannerResult out;
  out.coefficient_bound = 0.0;
  if (n == 0 || d == 0) return out;
  if (d > n) throw ParameterError("exact_spanner needs full row rank (d > n)");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(vectors);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double sigma_max = sigma[0];
  const double sigma_min = sigma[d - 1];
  if (!(sigma_min > 1e-13 * sigma_max) || !(sigma_min > 0.0)) {
    throw ParameterError("exact_spanner input is rank-deficient; use robust_spanner");
  }

  // Greedy start: repeatedly take the column with the largest component
  // orthogonal to the span of those already taken.
  Eigen::MatrixXd residual = vectors;
  std::vector<int> chosen;
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  const double init_floor = sigma_min / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index best = -1;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      double nrm = residual.col(i).norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = i;
      }
    }
    if (best_norm < init_floor * (1.0 - 1e-9)) {
      throw Error("exact_spanner: greedy step found no column above sigma_d / sqrt(n)");
    }
    Eigen::VectorXd q = residual.col(best) / best_norm;
    residual -= q * (q.transpose() * residual);
    chosen.push_back(static_cast<int>(best));
    taken[static_cast<std::size_t>(best)] = true;
  }

  Eigen::MatrixXd basis(d, d);
  for (Eigen::Index j = 0; j < d; ++j) basis.col(j) = vectors.col(chosen[static_cast<std::size_t>(j)]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
  out.log_volume.push_back(log_abs_det(lu));

  const double ratio = sigma_max / sigma_min;
  const int swap_cap = static_cast<int>(std::ceil(64.0 * static_cast<double>(d) * std::log2(ratio + 2.0)));
  bool changed = true;
  while (changed) {
    changed = false;
    if (lu.rcond() < 1.0 / kConditionWarning) ++out.condition_warnings;
    for (Eigen::Index i = 0; i < n && !changed; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      Eigen::VectorXd c = lu.solve(vectors.col(i));
      Eigen::Index j = 0;
      const double cmax = c.cwiseAbs().maxCoeff(&j);
      if (cmax <= kSwapThreshold) continue;
      taken[static_cast<std::size_t>(chosen[static_cast<std::size_t>(j)])] = false;
      chosen[static_cast<std::size_t>(j)] = static_cast<int>(i);
      taken[static_cast<std::size_t>(i)] = true;
      basis.col(j) = vectors.col(i);
      lu.compute(basis);
      const double vol = log_abs_det(lu);
      // Replacing column j by v_i scales |det| by |c_j| >= 2.
      if (vol < out.log_volume.back() + std::log(2.0) - 1e-9) {
        throw Error("exact_spanner: swap did not double the volume");
      }
      out.log_volume.push_back(vol);
      if (++out.swaps > swap_cap) {
        throw ConvergenceError("exact_spanner exceeded " + std::to_string(swap_cap) + " swaps");
      }
      changed = true;
    }
  }

  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max(worst, lu.solve(vectors.col(i)).cwiseAbs().maxCoeff());
  }
  out.indices = std::move(chosen);
  out.coefficient_bound = worst;
  out.rank = static_cast<int>(d);
  return out;
}

SpannerResult robust_spanner(const Eigen::MatrixXd& vectors, int s, double gamma, std::optional<int> rank_cap) {
  if (s < 0) throw ParameterError("robust_spanner needs s >= 0");
  if (!(gamma >= 0.0)) throw ParameterError("robust_spanner needs gamma >= 0");
  const Eigen::Index d = vectors.rows();
  const Eigen::Index n = vectors.cols();
  SpannerResult out;
  if (n == 0 || n < s) {
    out.indices = all_indices(n);
    out.coefficient_bound = 1.0;
    out.rank = static_cast<int>(n);
    return out;
  }

  // Duplicate coordinates collapse to one row scaled by sqrt(count); this
  // leaves the Gram matrix, and so the singular values and right vectors,
  // unchanged.
  CompressedRows comp = compress_rows(vectors);
  Eigen::MatrixXd weighted = comp.multiplicity.cwiseSqrt().asDiagonal() * comp.rows;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(weighted, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double threshold = gamma * std::sqrt(static_cast<double>(n));
  int t = 0;
  while (t < sigma.size() && sigma[t] > threshold) ++t;
  out.exceeded_s = t > s;
  if (rank_cap && t > *rank_cap) {
    t = *rank_cap;
    out.rank_capped = true;
  }
  out.rank = t;
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  if (out.rank_capped) {
    // The threshold no longer bounds the discarded spectrum; use it directly.
    out.residual_bound = (2.0 * t + 1.0) * sqrt_d * sigma[t];
  } else {
    out.residual_bound = 3.0 * gamma * s * std::sqrt(static_cast<double>(n) * static_cast<double>(d));
  }
  if (t == 0) {
    out.coefficient_bound = 0.0;
    return out;
  }

  // Coordinates of each column in the top-t left singular basis.
  Eigen::MatrixXd projected = sigma.head(t).asDiagonal() * svd.matrixV().leftCols(t).transpose();
  SpannerResult inner = exact_spanner(projected);
  out.indices = std::move(inner.indices);
  out.coefficient_bound = inner.coefficient_bound;
  out.swaps = inner.swaps;
  out.condition_warnings = inner.condition_warnings;
  out.log_volume = std::move(inner.log_volume);
  return out;
}

SpannerCheck verify_spanner(const Eigen::MatrixXd& vectors, std::span<const int> indices, double C, double gamma) {
  const Eigen::Index n = vectors.cols();
  const int t = static_cast<int>(indices.size());
  for (int idx : indices) {
    if (idx < 0 || idx >= n) throw ParameterError("spanner index out of range");
  }
  CompressedRows comp = compress_rows(vectors);
  const Eigen::MatrixXd& rows = comp.rows;
  const Eigen::VectorXd& mult = comp.multiplicity;
  const int d = static_cast<int>(rows.rows());

  Eigen::MatrixXd basis(d, t);
  for (int i = 0; i < t; ++i) basis.col(i) = rows.col(indices[static_cast<std::size_t>(i)]);

  SpannerCheck out;
  out.passed = true;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd target = rows.col(j);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(t);
    if (t > 0 && C > 0.0) {
      // Variables: c (t, boxed), then e+ and e- per compressed coordinate.
      LinearProgram lp(t + 2 * d);
      for (int i = 0; i < t; ++i) {
        lp.lower[static_cast<std::size_t>(i)] = -C;
        lp.upper[static_cast<std::size_t>(i)] = C;
      }
      for (int r = 0; r < d; ++r) {
        lp.cost[t + r] = mult[r];
        lp.cost[t + d + r] = mult[r];
      }
      lp.A = Eigen::MatrixXd::Zero(d, t + 2 * d);
      lp.A.leftCols(t) = basis;
      lp.A.block(0, t, d, d).setIdentity();
      lp.A.block(0, t + d, d, d) = -Eigen::MatrixXd::Identity(d, d);
      lp.sense.assign(static_cast<std::size_t>(d), RowSense::Equal);
      lp.rhs.assign(target.data(), target.data() + d);
      LpSolution sol = solve_lp(lp);
      if (sol.status != LpStatus::Optimal) throw Error("verify_spanner: LP did not reach an optimum");
      coef = sol.x.head(t);
    }
    const double residual = mult.dot((target - basis * coef).cwiseAbs());
    out.coefficients.push_back(std::move(coef));
    out.residuals.push_back(residual);
    out.max_residual = std::max(out.max_residual, residual);
    if (residual > gamma) out.passed = false;
  }
  return out;
}

}  // namespace seqsteal
