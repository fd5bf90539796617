#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqsteal/source.hpp"

namespace seqsteal {

enum class OracleMode {
  /// Edge weights from `samples_per_node` conditional queries per node.
  Sampled,
  /// Edge weights from the base's exact next-character law (no sampling noise).
  ExactBase,
  /// Exact law mixed with a seeded random distribution at weight eps, giving a
  /// surrogate that is eps-conditionally close to the base by construction.
  Perturbed,
};

OracleMode parse_oracle_mode(const std::string& name);
std::string to_string(OracleMode mode);

struct OracleConfig {
  OracleMode mode = OracleMode::Sampled;
  double eps = 0.01;
  int samples_per_node = 20000;
  std::uint64_t seed = 0;
};

struct BudgetReport {
  std::uint64_t conditional_queries = 0;
  std::uint64_t nodes_visited = 0;
};

/// Raise every entry of `p` to at least `floor` while keeping the total at 1:
/// entries below the floor are pinned to it and the rest are rescaled, until
/// no rescaled entry drops under the floor. Requires floor * |p| <= 1.
std::vector<double> floor_and_normalize(std::vector<double> p, double floor);

/// Empirical next-character frequencies from m conditional queries at h,
/// floored and renormalized.
std::vector<double> estimate_next_char(const SequenceSource& base, const TokenString& h, int m,
                                       double floor, Rng& rng);

/// Sample and exact-pdf access to a surrogate distribution H-hat that is
/// conditionally close to the base and positive.
///
/// Each tree node (prefix) gets its next-character weights the first time it
/// is touched, from a random stream derived from (seed, prefix), and keeps
/// them forever. Visit order therefore never changes H-hat.
class LazyPdfTree {
 public:
  LazyPdfTree(const SequenceSource& base, OracleConfig config);

  int alphabet_size() const { return alphabet_size_; }
  int length() const { return length_; }
  const OracleConfig& config() const { return config_; }

  /// Positivity floor eps / (10 O)^2 applied to every node.
  double floor() const { return floor_; }

  /// Next-character weights at h, visiting the node if needed.
  const std::vector<double>& node_weights(const TokenString& h);

  /// Pr_Hhat[h]: product of edge weights along the root-to-h path.
  double pdf(const TokenString& h);

  /// Pr_Hhat[f | h] as the product of edge weights below h (equal to
  /// pdf(h v f) / pdf(h) without the division).
  double conditional_pdf(const TokenString& h, const TokenString& f);

  /// Walk down from h choosing children by the fixed edge weights.
  TokenString cond_sample(const TokenString& h, Rng& rng);

  /// Full Pr_Hhat[. | h] over O^{T-|h|} in lexicographic order.
  std::vector<double> conditional_dist(const TokenString& h);

  BudgetReport budget() const;

  /// Visited nodes and their weights, ordered by prefix.
  std::vector<std::pair<TokenString, std::vector<double>>> snapshot() const;
  nlohmann::json snapshot_json() const;

 private:
  std::vector<double> visit(const TokenString& h);

  const SequenceSource& base_;
  OracleConfig config_;
  int alphabet_size_;
  int length_;
  double floor_;
  mutable std::mutex mutex_;
  std::map<TokenString, std::vector<double>> visited_;
  BudgetReport budget_;
};

}  // namespace seqsteal
