#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "seqsteal/oracle.hpp"

namespace seqsteal {

/// Importance-sampled sketches of the conditional future distributions of a
/// set of histories of a common length t.
///
/// `futures` is a multiset: k draws from each history, duplicates kept as
/// separate coordinates. For a future f,
///   w[f]   = 1 / (k * sum_i Pr[f | h_i])
///   u_i[f] = Pr[f | h_i] * w[f].
struct SketchBundle {
  int t = 0;
  int k = 0;
  std::vector<TokenString> histories;
  std::vector<TokenString> futures;
  std::vector<Eigen::VectorXd> u;
  Eigen::VectorXd w;

  /// Sketch of a history in the bundle; throws if absent.
  const Eigen::VectorXd& u_of(const TokenString& h) const;
};

SketchBundle build_vectors(LazyPdfTree& oracle, int t, std::span<const TokenString> histories, int k, Rng& rng);

/// x log max(x, c) - x log max(y, c), natural log.
double trunc_kl_scalar(double x, double y, double c);

/// sum_i trunc_kl_scalar(u[i], v[i], w[i]).
double trunc_kl_vec(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& w);
double trunc_kl_vec(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double c);

/// Same sum with coordinate i counted `weight[i]` times.
double trunc_kl_weighted(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& weight);

struct CheckResult {
  bool passed = false;
  double worst_gap = 0.0;
  int trials = 0;
};

/// Sketch coordinates with identical values merged: coordinate j stands for
/// count[j] coordinates of the full multiset.
struct WeightedSketch {
  std::vector<Eigen::VectorXd> u;
  Eigen::VectorXd w;
  Eigen::VectorXd count;
};

/// Merge identical coordinates of full-length sketches (w may be empty).
WeightedSketch merge_coordinates(std::span<const Eigen::VectorXd> vectors, const Eigen::VectorXd& w);

/// Sketch of explicit distributions over a common finite domain: k draws
/// from each, with w and u as in build_vectors, in merged form (one
/// coordinate per drawn domain element).
WeightedSketch sketch_distributions(std::span<const Eigen::VectorXd> dists, int k, Rng& rng);

/// sum_j count[j] |sum_i c_i u_i[j]|.
double sketch_l1(const WeightedSketch& sketch, const Eigen::VectorXd& c);

/// Random coefficients: between 1 and min(r, m) nonzeros, each uniform in
/// [-bound, bound].
Eigen::VectorXd random_sparse_coefficients(int m, int r, double bound, Rng& rng);

/// | ||sum c_i D_i||_1 - ||sum c_i u_i||_1 |.
double representation_gap(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch,
                          const Eigen::VectorXd& c);

struct KlPair {
  double exact = 0.0;
  double sketched = 0.0;
};

/// KL_{>=tau*}(sum c D || sum c' D) against KL_{>=tau* w}(sum c u || sum c' u).
KlPair kl_preservation_pair(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch,
                            const Eigen::VectorXd& c, const Eigen::VectorXd& c_prime, double tau_star);

/// Random-trial check of (r, gamma)-representativeness against exact
/// distributions.
CheckResult check_representative(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch, int r,
                                  double gamma, int trials, Rng& rng);
CheckResult check_representative(std::span<const Eigen::VectorXd> dists, std::span<const Eigen::VectorXd> vectors,
                                  int r, double gamma, int trials, Rng& rng);

/// Random-trial check of (r, gamma, tau) KL preservation: |c_i| <= r,
/// |c'_i| <= r / tau, tau* uniform in [tau, 1].
CheckResult check_kl_preserving(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch, int r,
                                double gamma, double tau, int trials, Rng& rng);
CheckResult check_kl_preserving(std::span<const Eigen::VectorXd> dists, std::span<const Eigen::VectorXd> vectors,
                                const Eigen::VectorXd& w, int r, double gamma, double tau, int trials, Rng& rng);

/// max over i, a in samples[i], j of |exact_j[a] - surrogate_j[a]| / exact_i[a].
/// Distributions are dense vectors over a common domain; samples hold
/// domain indices.
double perturbation_audit(std::span<const Eigen::VectorXd> exact, std::span<const Eigen::VectorXd> surrogate,
                          const std::vector<std::vector<std::uint64_t>>& samples);

}  // namespace seqsteal
