#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "seqsteal/errors.hpp"
#include "seqsteal/hmm.hpp"
#include "seqsteal/learner.hpp"
#include "seqsteal/oracle.hpp"
#include "seqsteal/sampler.hpp"

namespace seqsteal {

/// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline constexpr std::uint64_t kExactGuard = 10'000'000;

using PdfFn = std::function<double(const TokenString&)>;
using SamplerFn = std::function<TokenString(Rng&)>;

/// Half the L1 distance between two pdfs over O^T, by enumeration.
double tv_exact(const PdfFn& p, const PdfFn& q, int O, int T);
/// Same for dense vectors indexed lexicographically.
double tv_exact(const std::vector<double>& p, const std::vector<double>& q);

struct TvEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
};

/// 1 - sum_x min(phat(x), q(x)) over the empirical support, with a
/// percentile bootstrap interval. Biased upward for small n.
TvEstimate tv_empirical(const SamplerFn& sampler, const PdfFn& q, int n, Rng& rng, int resamples = 200,
                        double level = 0.95);

struct ExperimentConfig {
  // Base HMM: loaded from `hmm_file` when set, otherwise generated.
  std::string hmm_file;
  int S = 2;
  int O = 2;
  int T = 5;
  std::uint64_t hmm_seed = 7;

  OracleConfig oracle{OracleMode::ExactBase, 0.01, 20000, 0};
  LearnerParams learner;
  /// Rank bound handed to the learner; 0 means the HMM's state count.
  int S_bound = 0;
  SamplerConfig sampler;
  std::uint64_t sampler_seed = 13;

  bool audit = true;
  AuditParams audit_params;

  /// "exact" or "empirical".
  std::string eval_mode = "exact";
  int eval_samples = 20000;
  std::uint64_t eval_seed = 17;

  std::string out_dir = "out";

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults, except seeds: a missing seed is drawn
  /// fresh so that the resolved config (recorded in the report) is complete.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct RunReport {
  ExperimentConfig config;
  BudgetReport budget;
  std::vector<StepStats> steps;
  std::vector<int> level_sizes;
  std::optional<AuditReport> audit;
  std::string tv_method;
  double tv = 0.0;
  double tv_ci_low = 0.0;
  double tv_ci_high = 0.0;
  /// Exact mode only: distance to the oracle's surrogate, and total mass.
  std::optional<double> tv_surrogate;
  std::optional<double> learned_mass;
  SamplerStats sampler_stats;
  double truncation = 0.0;
  double rounding_threshold = 0.0;
  /// Seconds per stage; excluded from reproducibility comparisons.
  std::vector<std::pair<std::string, double>> timing;

  nlohmann::json to_json(bool with_timing = true) const;
};

/// Load or generate the base model described by the config.
Hmm make_hmm(const ExperimentConfig& config);

/// Generate/load HMM, build the oracle, learn, audit, evaluate, and write
/// hmm.json, rep.json and report.json into out_dir (skipped when empty).
/// Failures are rethrown as StageError.
RunReport run_pipeline(const ExperimentConfig& config);

}  // namespace seqsteal
