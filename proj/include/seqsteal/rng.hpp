#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "seqsteal/tokens.hpp"

namespace seqsteal {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream keyed by (seed, salt).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(splitmix64(seed) ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}

/// Seed for an independent stream keyed by (seed, string). The length is mixed
/// in so that prefixes never collide with their extensions by construction.
inline std::uint64_t derive_seed(std::uint64_t seed, const TokenString& key) {
  std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL) ^ key.size();
  for (Token t : key) h = splitmix64(h ^ static_cast<std::uint64_t>(t + 1));
  return h;
}

/// Index drawn from the (unnormalized, nonnegative) weights.
inline int sample_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += weights[i];
    if (r < acc) return static_cast<int>(i);
  }
  return last_positive;
}

/// Dirichlet(1, ..., 1) draw of dimension n.
inline std::vector<double> uniform_simplex(int n, Rng& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) {
    x = g(rng);
    s += x;
  }
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace seqsteal
