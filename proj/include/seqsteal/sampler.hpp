#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seqsteal/learner.hpp"

namespace seqsteal {

/// max(v_i, tau) / sum_j max(v_j, tau). The largest entry absorbs the
/// rounding residue so the output sums to 1.
std::vector<double> round_dist(const std::vector<double>& v, double tau);

/// One change-of-basis projection over compressed coordinates. Coordinate j
/// stands for `weight[j]` identical sketch coordinates.
struct ProjectionProblem {
  /// Rows are the sketches of the spanning histories.
  Eigen::MatrixXd R;
  Eigen::VectorXd z;
  Eigen::VectorXd floor;
  Eigen::VectorXd weight;
  double bound = 0.0;

  int num_coefficients() const { return static_cast<int>(R.rows()); }
  int num_coords() const { return static_cast<int>(R.cols()); }

  /// Truncated KL of alpha^T R against z with the floor as truncation.
  double objective(const Eigen::VectorXd& alpha) const;
  /// Truncated KL between two points of the coefficient space.
  double divergence(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) const;
  /// Weighted L1 norm of z.
  double z_norm() const;
  /// Equality constraint row: sum of alpha^T R over all coordinates.
  Eigen::VectorXd mass() const;
  bool feasible(const Eigen::VectorXd& alpha, double eq_tol = 1e-9) const;
};

struct ProjectionResult {
  Eigen::VectorXd alpha;
  double objective = 0.0;
  int iterations = 0;
};

/// Minimizes the truncated KL of alpha^T R to z over
/// { |alpha| <= bound, alpha^T R >= floor, sum alpha^T R = 1 }.
/// An LP finds a strictly feasible start; a log-barrier Newton method on the
/// affine slice then follows the central path to objective accuracy `tol`.
/// Throws InfeasibleError naming the constraint family that cannot be met
/// and ConvergenceError when `max_iterations` Newton steps do not suffice.
ProjectionResult kl_project(const ProjectionProblem& problem, double tol = 1e-8, int max_iterations = 10000);

/// Random points of the projection's feasible set (mixtures of LP vertices
/// and an interior point).
std::vector<Eigen::VectorXd> random_feasible_points(const ProjectionProblem& problem, int count, Rng& rng);

struct SamplerConfig {
  /// Lower clamp on the truncation base.
  double c_floor = 1e-40;
  double tol = 1e-8;
  int max_iterations = 10000;
  /// Number of times a projection may retry with the floor divided by 10.
  int max_fallbacks = 12;
};

/// Truncation base eta^{10 O T S}, clamped below at c_floor (log space).
double effective_truncation(double eta, int O, int T, int S, double c_floor);

/// Everything observed about one projection.
struct ProjectionRecord {
  int t = 0;
  TokenString prefix;
  const ProjectionProblem* problem = nullptr;
  Eigen::VectorXd alpha;
  double objective = 0.0;
  int iterations = 0;
  int fallbacks = 0;
};

struct TraceStep {
  int t = 0;
  Token o = 0;
  std::vector<double> p;
  double objective = 0.0;
  int iterations = 0;
  int fallbacks = 0;
};

nlohmann::json trace_json(const TraceStep& s);

struct SamplerStats {
  std::uint64_t projections = 0;
  std::uint64_t newton_iterations = 0;
  std::uint64_t fallbacks = 0;
};

/// The distribution H' defined by the representation: per-character rounded
/// next-token laws with a KL projection after every token. Sampling and
/// exact pdf evaluation run the same recursion.
class Sampler {
 public:
  using Observer = std::function<void(const ProjectionRecord&)>;

  Sampler(const LearnedRepresentation& rep, SamplerConfig config = {});

  int alphabet_size() const { return rep_.O; }
  int length() const { return rep_.T; }
  double truncation() const { return c_eff_; }
  /// Rounding threshold 2 c^0.1 of the next-character step.
  double rounding_threshold() const { return tau_; }

  TokenString sample(std::uint64_t seed, std::vector<TraceStep>* trace = nullptr) const;
  TokenString sample(Rng& rng, std::vector<TraceStep>* trace = nullptr) const;

  /// Pr_{H'}[x] for |x| = T.
  double pdf(const TokenString& x) const;

  /// Pr_{H'} over all of O^T in lexicographic order.
  std::vector<double> full_pdf() const;

  /// Called after every projection. Not synchronized: set before sampling.
  void set_observer(Observer obs) { observer_ = std::move(obs); }

  SamplerStats stats() const;

  struct State {
    int t = 0;
    TokenString prefix;
    Eigen::VectorXd alpha;
  };

  State initial_state() const;
  std::vector<double> next_char_probs(const State& s) const;
  /// Append o (drawn with probabilities p) and project.
  State advance(const State& s, Token o, const std::vector<double>& p, TraceStep* step = nullptr) const;

 private:
  struct LevelData {
    // Problem template for projecting onto this level (rows: H of the level).
    ProjectionProblem base;
    // Per token o: rows are sketches of h v o for h in the previous H.
    std::vector<Eigen::MatrixXd> extension;
    double floor_scale = 0.0;
  };

  void full_pdf_rec(const State& s, double mass, std::vector<double>& out) const;

  LearnedRepresentation rep_;
  SamplerConfig config_;
  double c_eff_ = 0.0;
  double tau_ = 0.0;
  std::vector<LevelData> levels_;
  Observer observer_;
  mutable std::atomic<std::uint64_t> projections_{0};
  mutable std::atomic<std::uint64_t> iterations_{0};
  mutable std::atomic<std::uint64_t> fallbacks_{0};
};

}  // namespace seqsteal
