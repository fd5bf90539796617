#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace seqsteal {

/// Chosen subset of a vector collection together with the guarantee it comes
/// with: every vector is within `residual_bound` (L1) of a combination of the
/// chosen ones whose coefficients are bounded by `coefficient_bound`.
struct SpannerResult {
  std::vector<int> indices;
  double coefficient_bound = 2.0;
  double residual_bound = 0.0;
  /// Singular directions kept (robust spanner only).
  int rank = 0;
  /// More than `s` directions cleared the threshold.
  bool exceeded_s = false;
  /// The kept directions were cut at the caller's cap.
  bool rank_capped = false;
  int swaps = 0;
  int condition_warnings = 0;
  /// log|det| of the working basis after initialization and after each swap.
  std::vector<double> log_volume;
};

/// Barycentric (2, 0)-spanner of the columns of a d x n matrix with full row
/// rank: greedy max-residual initialization, then swaps while some vector
/// needs a coefficient above 2 in the current basis.
SpannerResult exact_spanner(const Eigen::MatrixXd& vectors);

/// Spanner for columns that lie close to an s-dimensional subspace. Keeps the
/// singular directions above gamma * sqrt(n), runs exact_spanner on the
/// projections and reports the L1 residual bound 3 gamma s sqrt(n d).
/// With `rank_cap`, at most that many directions are kept.
SpannerResult robust_spanner(const Eigen::MatrixXd& vectors, int s, double gamma,
                             std::optional<int> rank_cap = std::nullopt);

struct SpannerCheck {
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<double> residuals;
  double max_residual = 0.0;
  bool passed = false;
};

/// For every column v_j, min ||v_j - sum_i c_i v_{a_i}||_1 over ||c||_inf <= C,
/// solved as a linear program. Passes iff every residual is <= gamma.
SpannerCheck verify_spanner(const Eigen::MatrixXd& vectors, std::span<const int> indices, double C,
                            double gamma);

}  // namespace seqsteal
