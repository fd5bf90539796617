#pragma once

#include <optional>
#include <vector>

#include "seqsteal/rng.hpp"
#include "seqsteal/tokens.hpp"

namespace seqsteal {

/// Conditional-query access to a distribution over strings of fixed length.
/// This is the only view of the target the learner ever gets.
class SequenceSource {
 public:
  virtual ~SequenceSource() = default;

  virtual int alphabet_size() const = 0;
  virtual int length() const = 0;

  /// One conditional query: a future of length T - |h| drawn from Pr[. | h].
  virtual TokenString sample_future(const TokenString& h, Rng& rng) const = 0;

  /// Exact next-character law at h, when the source can provide it. Only the
  /// oracle's exact-base test mode uses this.
  virtual std::optional<std::vector<double>> exact_next_char(const TokenString& h) const {
    (void)h;
    return std::nullopt;
  }
};

}  // namespace seqsteal
