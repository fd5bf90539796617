#include "seqsteal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqsteal/errors.hpp"

namespace seqsteal {

OracleMode parse_oracle_mode(const std::string& name) {
  if (name == "sampled") return OracleMode::Sampled;
  if (name == "exact-base") return OracleMode::ExactBase;
  if (name == "perturbed") return OracleMode::Perturbed;
  throw ParameterError("unknown oracle mode '" + name + "'");
}

std::string to_string(OracleMode mode) {
  switch (mode) {
    case OracleMode::Sampled:
      return "sampled";
    case OracleMode::ExactBase:
      return "exact-base";
    case OracleMode::Perturbed:
      return "perturbed";
  }
  return "unknown";
}

std::vector<double> floor_and_normalize(std::vector<double> p, double floor) {
  const std::size_t n = p.size();
  if (n == 0) throw ParameterError("empty distribution");
  if (floor < 0.0 || floor * static_cast<double>(n) > 1.0 + 1e-15) {
    throw ParameterError("floor must satisfy 0 <= floor <= 1/O");
  }
  for (double& x : p) x = std::max(x, 0.0);
  std::vector<bool> pinned(n, false);
  double scale = 0.0;
  for (;;) {
    double free_mass = 0.0;
    std::size_t num_pinned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) ++num_pinned;
      else free_mass += p[i];
    }
    const double budget = 1.0 - static_cast<double>(num_pinned) * floor;
    if (num_pinned == n || free_mass <= 0.0) {
      // Everything is at the floor, or nothing left to rescale: spread evenly.
      for (std::size_t i = 0; i < n; ++i) {
        if (!pinned[i]) pinned[i] = true;
      }
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
      return p;
    }
    scale = budget / free_mass;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pinned[i] && p[i] * scale < floor) {
        pinned[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (std::size_t i = 0; i < n; ++i) p[i] = pinned[i] ? floor : p[i] * scale;
  // Put the rounding residue on the largest entry so the total is 1.
  const auto big = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  double rest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != big) rest += p[i];
  }
  p[big] = 1.0 - rest;
  return p;
}

std::vector<double> estimate_next_char(const SequenceSource& base, const TokenString& h, int m,
                                       double floor, Rng& rng) {
  if (m <= 0) throw ParameterError("estimate_next_char needs m >= 1 queries");
  if (static_cast<int>(h.size()) >= base.length()) throw LengthError("no next character after T tokens");
  std::vector<double> counts(static_cast<std::size_t>(base.alphabet_size()), 0.0);
  for (int i = 0; i < m; ++i) {
    TokenString f = base.sample_future(h, rng);
    counts[static_cast<std::size_t>(f.front())] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(m);
  return floor_and_normalize(std::move(counts), floor);
}

LazyPdfTree::LazyPdfTree(const SequenceSource& base, OracleConfig config)
    : base_(base),
      config_(config),
      alphabet_size_(base.alphabet_size()),
      length_(base.length()) {
  const double o = static_cast<double>(alphabet_size_);
  if (config_.mode == OracleMode::ExactBase) {
    if (!(config_.eps >= 0.0 && config_.eps < 1.0)) throw ParameterError("eps must lie in [0, 1)");
    if (!base.exact_next_char({}).has_value()) {
      throw ParameterError("exact-base mode needs a source with exact next-character probabilities");
    }
  } else {
    if (!(config_.eps > 0.0 && config_.eps < 1.0)) throw ParameterError("eps must lie in (0, 1)");
  }
  if (config_.mode == OracleMode::Sampled && config_.samples_per_node <= 0) {
    throw ParameterError("samples_per_node must be positive");
  }
  if (config_.mode == OracleMode::Perturbed && !base.exact_next_char({}).has_value()) {
    throw ParameterError("perturbed mode needs a source with exact next-character probabilities");
  }
  floor_ = config_.eps / ((10.0 * o) * (10.0 * o));
}

std::vector<double> LazyPdfTree::visit(const TokenString& h) {
  Rng rng(derive_seed(config_.seed, h));
  switch (config_.mode) {
    case OracleMode::Sampled:
      budget_.conditional_queries += static_cast<std::uint64_t>(config_.samples_per_node);
      return estimate_next_char(base_, h, config_.samples_per_node, floor_, rng);
    case OracleMode::ExactBase:
      return floor_and_normalize(*base_.exact_next_char(h), floor_);
    case OracleMode::Perturbed: {
      auto p = *base_.exact_next_char(h);
      auto noise = uniform_simplex(alphabet_size_, rng);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - config_.eps) * p[i] + config_.eps * noise[i];
      return floor_and_normalize(std::move(p), floor_);
    }
  }
  throw Error("unreachable oracle mode");
}

const std::vector<double>& LazyPdfTree::node_weights(const TokenString& h) {
  if (static_cast<int>(h.size()) >= length_) throw LengthError("leaves have no next-character weights");
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = visited_.find(h);
  if (it != visited_.end()) return it->second;
  check_tokens(h, alphabet_size_);
  auto weights = visit(h);
  ++budget_.nodes_visited;
  return visited_.emplace(h, std::move(weights)).first->second;
}

double LazyPdfTree::pdf(const TokenString& h) {
  if (static_cast<int>(h.size()) > length_) throw LengthError("pdf query longer than T");
  check_tokens(h, alphabet_size_);
  double p = 1.0;
  TokenString node;
  node.reserve(h.size());
  for (Token o : h) {
    p *= node_weights(node)[static_cast<std::size_t>(o)];
    node.push_back(o);
  }
  return p;
}

double LazyPdfTree::conditional_pdf(const TokenString& h, const TokenString& f) {
  if (h.size() + f.size() > static_cast<std::size_t>(length_)) throw LengthError("h v f longer than T");
  check_tokens(f, alphabet_size_);
  // Product of edge weights below h; equals pdf(h v f) / pdf(h) without the
  // division round-off.
  double p = 1.0;
  TokenString node = h;
  for (Token o : f) {
    p *= node_weights(node)[static_cast<std::size_t>(o)];
    node.push_back(o);
  }
  return p;
}

TokenString LazyPdfTree::cond_sample(const TokenString& h, Rng& rng) {
  if (static_cast<int>(h.size()) >= length_) throw LengthError("cond_sample needs |h| < T");
  check_tokens(h, alphabet_size_);
  TokenString node = h;
  TokenString f;
  f.reserve(static_cast<std::size_t>(length_) - h.size());
  while (static_cast<int>(node.size()) < length_) {
    const auto& w = node_weights(node);
    Token o = sample_index(w, rng);
    node.push_back(o);
    f.push_back(o);
  }
  return f;
}

std::vector<double> LazyPdfTree::conditional_dist(const TokenString& h) {
  const int remaining = length_ - static_cast<int>(h.size());
  if (remaining < 0) throw LengthError("history longer than T");
  std::vector<double> out(count_strings(alphabet_size_, remaining), 0.0);
  for (std::uint64_t i = 0; i < out.size(); ++i) {
    out[i] = conditional_pdf(h, string_at(i, alphabet_size_, remaining));
  }
  return out;
}

BudgetReport LazyPdfTree::budget() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return budget_;
}

std::vector<std::pair<TokenString, std::vector<double>>> LazyPdfTree::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return {visited_.begin(), visited_.end()};
}

nlohmann::json LazyPdfTree::snapshot_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [h, w] : snapshot()) {
    out.push_back({{"prefix", h}, {"weights", w}});
  }
  return out;
}

}  // namespace seqsteal
