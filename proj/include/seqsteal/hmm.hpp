#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "seqsteal/source.hpp"

namespace seqsteal {

/// Matrix of conditional future distributions for a fixed split point t.
/// Rows are histories in O^t, columns futures in O^{T-t}, both in
/// lexicographic order. Rows of zero-probability histories are zero and
/// flagged in `null_rows`.
struct OndimMatrix {
  int t = 0;
  Eigen::MatrixXd M;
  std::vector<bool> null_rows;
};

/// Hidden Markov model over a finite alphabet with a fixed output length.
///
/// `trans(s', s)` is Pr[next state s' | state s] and `emit(x, s)` is
/// Pr[emit x | state s]; both are column-stochastic. State s_t emits x_t.
class Hmm : public SequenceSource {
 public:
  Hmm(Eigen::VectorXd mu, Eigen::MatrixXd trans, Eigen::MatrixXd emit, int seq_len);

  /// Dirichlet(1, ..., 1) initial distribution and columns.
  static Hmm random(int num_states, int alphabet_size, int seq_len, std::uint64_t seed);

  int num_states() const { return static_cast<int>(mu_.size()); }
  int alphabet_size() const override { return static_cast<int>(emit_.rows()); }
  int length() const override { return seq_len_; }

  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& trans() const { return trans_; }
  const Eigen::MatrixXd& emit() const { return emit_; }

  /// Pr[x] for a full-length string, by the forward recursion.
  double sequence_prob(const TokenString& x) const;

  /// Pr[first |h| tokens equal h], for any |h| <= T.
  double prefix_prob(const TokenString& h) const;

  /// Distribution of the state that will emit token |h|+1, given h.
  Eigen::VectorXd predictive_state(const TokenString& h) const;

  /// Pr[. | h] over all futures of length T - |h|, lexicographic order.
  std::vector<double> conditional_future_dist(const TokenString& h) const;

  /// A future drawn from Pr[. | h] by filtering then rolling the chain.
  TokenString conditional_sample(const TokenString& h, Rng& rng) const;
  TokenString conditional_sample(const TokenString& h, std::uint64_t seed) const;

  OndimMatrix ondim_matrix(int t) const;

  TokenString sample_future(const TokenString& h, Rng& rng) const override {
    return conditional_sample(h, rng);
  }
  std::optional<std::vector<double>> exact_next_char(const TokenString& h) const override;

  nlohmann::json to_json() const;
  static Hmm from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Hmm load(const std::filesystem::path& path);

 private:
  // Unnormalized forward vector Pr[h, s_{|h|} = s]; mu when h is empty.
  Eigen::VectorXd forward(const TokenString& h) const;
  void check_history(const TokenString& h) const;

  Eigen::VectorXd mu_;
  Eigen::MatrixXd trans_;
  Eigen::MatrixXd emit_;
  int seq_len_;
};

}  // namespace seqsteal
