#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seqsteal/oracle.hpp"

namespace seqsteal {

struct LearnerParams {
  int k = 512;
  int N = 64;
  double gamma = 0.05;
  double eta = 0.05;
  std::uint64_t seed = 7;
  /// Run verify_spanner on every candidate set (costs one LP per candidate).
  bool verify_spanners = true;
};

/// Everything kept for one prefix length t. Level 0 only has H = {empty}.
struct Level {
  int t = 0;
  /// Spanning histories of length t.
  std::vector<TokenString> H;
  /// Next-character law under the oracle for each history of the previous
  /// level's H (|H_{t-1}| x O).
  Eigen::MatrixXd P;
  /// H together with every previous spanning history extended by one token.
  std::vector<TokenString> B;
  /// Sampled futures (a multiset), shared by all sketches of the level.
  std::vector<TokenString> X;
  std::map<TokenString, Eigen::VectorXd> u;
  Eigen::VectorXd w;
};

/// Diagnostics for one spanner-building step.
struct StepStats {
  int t = 0;
  int candidates = 0;
  int distinct_futures = 0;
  int rank = 0;
  bool rank_capped = false;
  bool exceeded_s = false;
  int chosen = 0;
  int swaps = 0;
  int condition_warnings = 0;
  double threshold = 0.0;
  double residual_bound = 0.0;
  /// Worst L1 residual over all candidates at coefficient bound 2; negative
  /// when verification was skipped.
  double verified_residual = -1.0;
};

struct LearnedRepresentation {
  int S = 0;
  int O = 0;
  int T = 0;
  LearnerParams params;
  double spanner_threshold = 0.0;
  /// levels[t] for t = 0..T.
  std::vector<Level> levels;
  std::vector<StepStats> steps;
  BudgetReport budget;

  /// Throws ValidationError if any structural invariant fails. `floor` is the
  /// oracle positivity floor (pass 0 to skip the entrywise check on P).
  void validate(double floor = 0.0) const;

  nlohmann::json to_json() const;
  static LearnedRepresentation from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static LearnedRepresentation load(const std::filesystem::path& path);
};

/// Row i is the oracle's next-character law at histories[i].
Eigen::MatrixXd next_char_table(LazyPdfTree& oracle, const std::vector<TokenString>& histories);

/// Threshold handed to the robust spanner: gamma / (100 S k^2), floored.
double spanner_threshold(const LearnerParams& params, int S);

/// One extension step: candidates are every h v o for h in `current` plus N
/// fresh length-(t+1) prefixes from the oracle; returns at most S of them.
std::vector<TokenString> build_spanner_step(LazyPdfTree& oracle, int t, const std::vector<TokenString>& current,
                                            int S, const LearnerParams& params, Rng& rng,
                                            StepStats* stats = nullptr);

LearnedRepresentation learn(LazyPdfTree& oracle, int S, const LearnerParams& params);

struct LevelAudit {
  int t = 0;
  bool size_ok = false;
  double w_max = 0.0;
  double w_bound = 0.0;
  bool w_ok = false;
  int tested = 0;
  int failing = 0;
  /// Futures too numerous to enumerate: the representability check was skipped.
  bool skipped = false;
};

struct AuditReport {
  std::vector<LevelAudit> levels;
  double failing_fraction = 0.0;
  bool structure_ok = false;
  nlohmann::json to_json() const;
};

struct AuditParams {
  /// Truncation base c: the w check uses 1 / sqrt(c).
  double c = 1e-40;
  /// Lower bound required of the reconstruction on the sampled futures.
  double c_prime = 1e-9;
  double eta = 0.05;
  int histories_per_level = 50;
  std::uint64_t seed = 11;
  /// Largest O^{T-t} for which the conditional law is enumerated.
  std::uint64_t max_futures = 1u << 16;
};

/// Samples histories from the oracle at every level and checks that each is
/// reconstructible from the level's spanning histories with coefficients in
/// [-2S, 2S], L1 residual <= 2 S eta, and reconstruction >= c' on X.
AuditReport audit_representation(const LearnedRepresentation& rep, LazyPdfTree& oracle, const AuditParams& params);

}  // namespace seqsteal
