#include "seqsteal/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "seqsteal/errors.hpp"
#include "seqsteal/linalg.hpp"

namespace seqsteal {

const Eigen::VectorXd& SketchBundle::u_of(const TokenString& h) const {
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (histories[i] == h) return u[i];
  }
  throw ParameterError("history '" + history_key(h) + "' is not in the sketch bundle");
}

SketchBundle build_vectors(LazyPdfTree& oracle, int t, std::span<const TokenString> histories, int k, Rng& rng) {
  if (k < 1) throw ParameterError("build_vectors needs k >= 1");
  if (histories.empty()) throw ParameterError("build_vectors needs at least one history");
  if (t < 0 || t > oracle.length()) throw ParameterError("build_vectors: t out of range");
  for (const auto& h : histories) {
    if (static_cast<int>(h.size()) != t) throw LengthError("every history must have length t");
  }

  SketchBundle out;
  out.t = t;
  out.k = k;
  out.histories.assign(histories.begin(), histories.end());
  const bool leaf_level = t == oracle.length();
  for (const auto& h : histories) {
    for (int j = 0; j < k; ++j) out.futures.push_back(leaf_level ? TokenString{} : oracle.cond_sample(h, rng));
  }

  // Densities depend only on the future, so evaluate them once per distinct
  // future and scatter.
  std::map<TokenString, std::size_t> distinct;
  std::vector<std::size_t> slot(out.futures.size());
  for (std::size_t x = 0; x < out.futures.size(); ++x) {
    slot[x] = distinct.emplace(out.futures[x], distinct.size()).first->second;
  }
  const std::size_t s = histories.size();
  std::vector<std::vector<double>> dens(distinct.size(), std::vector<double>(s, 0.0));
  std::vector<double> weight(distinct.size(), 0.0);
  for (const auto& [f, idx] : distinct) {
    double total = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      dens[idx][i] = oracle.conditional_pdf(histories[i], f);
      total += dens[idx][i];
    }
    const double scaled = static_cast<double>(k) * total;
    if (!(scaled >= 1e-300)) throw Error("build_vectors: vanishing density sum; the oracle is not positive");
    weight[idx] = 1.0 / scaled;
  }

  const auto dim = static_cast<Eigen::Index>(out.futures.size());
  out.w.resize(dim);
  out.u.assign(s, Eigen::VectorXd(dim));
  for (Eigen::Index x = 0; x < dim; ++x) {
    const std::size_t idx = slot[static_cast<std::size_t>(x)];
    out.w[x] = weight[idx];
    for (std::size_t i = 0; i < s; ++i) out.u[i][x] = dens[idx][i] * weight[idx];
  }
  return out;
}

double trunc_kl_scalar(double x, double y, double c) {
  if (!(c > 0.0)) throw ParameterError("truncation level must be positive");
  return x * std::log(std::max(x, c)) - x * std::log(std::max(y, c));
}

double trunc_kl_vec(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  if (u.size() != v.size() || u.size() != w.size()) throw LengthError("trunc_kl_vec: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += trunc_kl_scalar(u[i], v[i], w[i]);
  return s;
}

double trunc_kl_vec(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double c) {
  if (u.size() != v.size()) throw LengthError("trunc_kl_vec: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += trunc_kl_scalar(u[i], v[i], c);
  return s;
}

double trunc_kl_weighted(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& weight) {
  if (u.size() != v.size() || u.size() != w.size() || u.size() != weight.size()) {
    throw LengthError("trunc_kl_weighted: dimension mismatch");
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += weight[i] * trunc_kl_scalar(u[i], v[i], w[i]);
  return s;
}

Eigen::VectorXd random_sparse_coefficients(int m, int r, double bound, Rng& rng) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
  if (m == 0 || r == 0) return c;
  const int max_nonzero = std::min(r, m);
  const int nnz = std::uniform_int_distribution<int>(1, max_nonzero)(rng);
  std::vector<int> pos(static_cast<std::size_t>(m));
  std::iota(pos.begin(), pos.end(), 0);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::uniform_real_distribution<double> val(-bound, bound);
  for (int i = 0; i < nnz; ++i) c[pos[static_cast<std::size_t>(i)]] = val(rng);
  return c;
}

namespace {

Eigen::VectorXd combine(std::span<const Eigen::VectorXd> vs, const Eigen::VectorXd& c) {
  if (vs.empty()) return {};
  if (static_cast<std::size_t>(c.size()) != vs.size()) throw LengthError("coefficient count mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(vs.front().size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].size() != out.size()) throw LengthError("vectors have different dimensions");
    if (c[static_cast<Eigen::Index>(i)] != 0.0) out += c[static_cast<Eigen::Index>(i)] * vs[i];
  }
  return out;
}

void check_pairing(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch) {
  if (dists.size() != sketch.u.size()) throw LengthError("need one sketch per distribution");
}

}  // namespace

WeightedSketch merge_coordinates(std::span<const Eigen::VectorXd> vectors, const Eigen::VectorXd& w) {
  const Eigen::Index d = vectors.empty() ? w.size() : vectors.front().size();
  const bool with_w = w.size() > 0;
  const Eigen::Index cols = static_cast<Eigen::Index>(vectors.size()) + (with_w ? 1 : 0);
  Eigen::MatrixXd table(d, cols);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) throw LengthError("sketch vectors have different dimensions");
    table.col(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  if (with_w) {
    if (w.size() != d) throw LengthError("w has the wrong dimension");
    table.col(cols - 1) = w;
  }
  CompressedRows comp = compress_rows(table);
  WeightedSketch out;
  for (std::size_t i = 0; i < vectors.size(); ++i) out.u.push_back(comp.rows.col(static_cast<Eigen::Index>(i)));
  if (with_w) out.w = comp.rows.col(cols - 1);
  out.count = comp.multiplicity;
  return out;
}

WeightedSketch sketch_distributions(std::span<const Eigen::VectorXd> dists, int k, Rng& rng) {
  if (k < 1) throw ParameterError("sketch_distributions needs k >= 1");
  if (dists.empty()) throw ParameterError("sketch_distributions needs at least one distribution");
  const Eigen::Index n = dists.front().size();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  for (const auto& d : dists) {
    if (d.size() != n) throw LengthError("distributions over different domains");
    if ((d.array() < 0.0).any()) throw ParameterError("distribution with a negative entry");
    total += d;
    // Multinomial(k, d) by sequential binomials.
    int left = k;
    double mass = d.sum();
    for (Eigen::Index a = 0; a < n && left > 0; ++a) {
      if (d[a] <= 0.0) continue;
      const double p = a + 1 == n || mass <= d[a] ? 1.0 : d[a] / mass;
      const int draw = std::binomial_distribution<int>(left, std::min(p, 1.0))(rng);
      counts[a] += draw;
      left -= draw;
      mass -= d[a];
    }
  }
  std::vector<Eigen::Index> drawn;
  for (Eigen::Index a = 0; a < n; ++a) {
    if (counts[a] > 0) drawn.push_back(a);
  }
  const auto dim = static_cast<Eigen::Index>(drawn.size());
  WeightedSketch out;
  out.w.resize(dim);
  out.count.resize(dim);
  out.u.assign(dists.size(), Eigen::VectorXd(dim));
  for (Eigen::Index j = 0; j < dim; ++j) {
    const Eigen::Index a = drawn[static_cast<std::size_t>(j)];
    out.w[j] = 1.0 / (static_cast<double>(k) * total[a]);
    out.count[j] = counts[a];
    for (std::size_t i = 0; i < dists.size(); ++i) out.u[i][j] = dists[i][a] * out.w[j];
  }
  return out;
}

double sketch_l1(const WeightedSketch& sketch, const Eigen::VectorXd& c) {
  return sketch.count.dot(combine(sketch.u, c).cwiseAbs());
}

double representation_gap(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch,
                          const Eigen::VectorXd& c) {
  check_pairing(dists, sketch);
  return std::abs(combine(dists, c).lpNorm<1>() - sketch_l1(sketch, c));
}

KlPair kl_preservation_pair(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch,
                            const Eigen::VectorXd& c, const Eigen::VectorXd& c_prime, double tau_star) {
  check_pairing(dists, sketch);
  if (sketch.w.size() != sketch.count.size()) throw ParameterError("KL preservation needs the w vector");
  KlPair out;
  out.exact = trunc_kl_vec(combine(dists, c), combine(dists, c_prime), tau_star);
  out.sketched = trunc_kl_weighted(combine(sketch.u, c), combine(sketch.u, c_prime), tau_star * sketch.w, sketch.count);
  return out;
}

CheckResult check_representative(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch, int r,
                                  double gamma, int trials, Rng& rng) {
  check_pairing(dists, sketch);
  const int m = static_cast<int>(dists.size());
  CheckResult out;
  out.trials = trials;
  for (int i = 0; i < trials; ++i) {
    Eigen::VectorXd c = random_sparse_coefficients(m, r, r, rng);
    out.worst_gap = std::max(out.worst_gap, representation_gap(dists, sketch, c));
  }
  out.passed = out.worst_gap <= gamma;
  return out;
}

CheckResult check_representative(std::span<const Eigen::VectorXd> dists, std::span<const Eigen::VectorXd> vectors,
                                  int r, double gamma, int trials, Rng& rng) {
  return check_representative(dists, merge_coordinates(vectors, Eigen::VectorXd()), r, gamma, trials, rng);
}

CheckResult check_kl_preserving(std::span<const Eigen::VectorXd> dists, const WeightedSketch& sketch, int r,
                                double gamma, double tau, int trials, Rng& rng) {
  check_pairing(dists, sketch);
  if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in (0, 1]");
  const int m = static_cast<int>(dists.size());
  std::uniform_real_distribution<double> tau_dist(tau, 1.0);
  CheckResult out;
  out.trials = trials;
  for (int i = 0; i < trials; ++i) {
    Eigen::VectorXd c = random_sparse_coefficients(m, r, r, rng);
    Eigen::VectorXd c_prime = random_sparse_coefficients(m, r, r / tau, rng);
    KlPair pair = kl_preservation_pair(dists, sketch, c, c_prime, tau_dist(rng));
    out.worst_gap = std::max(out.worst_gap, std::abs(pair.exact - pair.sketched));
  }
  out.passed = out.worst_gap <= gamma;
  return out;
}

CheckResult check_kl_preserving(std::span<const Eigen::VectorXd> dists, std::span<const Eigen::VectorXd> vectors,
                                const Eigen::VectorXd& w, int r, double gamma, double tau, int trials, Rng& rng) {
  return check_kl_preserving(dists, merge_coordinates(vectors, w), r, gamma, tau, trials, rng);
}

double perturbation_audit(std::span<const Eigen::VectorXd> exact, std::span<const Eigen::VectorXd> surrogate,
                          const std::vector<std::vector<std::uint64_t>>& samples) {
  if (exact.size() != surrogate.size() || samples.size() != exact.size()) {
    throw LengthError("perturbation_audit: mismatched inputs");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::uint64_t a : samples[i]) {
      const auto ai = static_cast<Eigen::Index>(a);
      const double base = exact[i][ai];
      for (std::size_t j = 0; j < exact.size(); ++j) {
        const double diff = std::abs(exact[j][ai] - surrogate[j][ai]);
        if (diff == 0.0) continue;
        worst = std::max(worst, base > 0.0 ? diff / base : std::numeric_limits<double>::infinity());
      }
    }
  }
  return worst;
}

}  // namespace seqsteal
