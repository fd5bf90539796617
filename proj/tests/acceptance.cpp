// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "seqsteal/dimred.hpp"
#include "seqsteal/harness.hpp"
#include "seqsteal/hmm.hpp"
#include "seqsteal/learner.hpp"
#include "seqsteal/oracle.hpp"
#include "seqsteal/sampler.hpp"
#include "seqsteal/spanner.hpp"

using namespace seqsteal;

namespace {

// Tolerances.
constexpr double kReferenceTv = 0.15;
constexpr double kReferenceSeconds = 60.0;
constexpr double kSmallAlphabetTv = 0.05;
constexpr double kRankRatio = 1e-8;
constexpr double kUlps = 4.0;
constexpr double kContractionSlack = 1e-6;
constexpr double kMassTolerance = 1e-6;
constexpr double kKlValue = 0.48375;
constexpr double kKlTolerance = 1e-4;

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& body) {
  Verdict v;
  auto start = std::chrono::steady_clock::now();
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("criterion %d (%s): %s  %s  [%.1fs]\n", id, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// The reference model and its learned representation, shared by 6 and 7.
struct Reference {
  Hmm hmm = Hmm::random(2, 2, 5, 7);
  LazyPdfTree tree{hmm, {OracleMode::ExactBase, 0.01, 20000, 0}};
  LearnedRepresentation rep = learn(tree, 2, LearnerParams{});
};

Reference& reference() {
  static Reference r;
  return r;
}

Verdict end_to_end() {
  ExperimentConfig ref;
  ref.out_dir.clear();
  auto start = std::chrono::steady_clock::now();
  RunReport a = run_pipeline(ref);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ExperimentConfig small;
  small.out_dir.clear();
  small.S = 1;
  small.O = 3;
  small.T = 6;
  small.audit = false;
  RunReport b = run_pipeline(small);

  Verdict v;
  v.pass = a.tv <= kReferenceTv && secs <= kReferenceSeconds && b.tv <= kSmallAlphabetTv;
  v.detail = "reference tv=" + fmt("%.3e", a.tv) + " (<= 0.15) in " + fmt("%.2f", secs) +
             "s; S=1,O=3,T=6 tv=" + fmt("%.3e", b.tv) + " (<= 0.05)";
  return v;
}

Verdict rank_certificate() {
  Rng rng(2024);
  double worst = 0.0;
  int matrices = 0;
  for (int i = 0; i < 20; ++i) {
    const int S = std::uniform_int_distribution<int>(1, 3)(rng);
    const int O = std::uniform_int_distribution<int>(2, 3)(rng);
    const int T = std::uniform_int_distribution<int>(2, 6)(rng);
    Hmm m = Hmm::random(S, O, T, rng());
    for (int t = 1; t < T; ++t) {
      Eigen::MatrixXd M = m.ondim_matrix(t).M;
      Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
      const auto& sv = svd.singularValues();
      ++matrices;
      if (sv.size() > S) worst = std::max(worst, sv[S] / sv[0]);
    }
  }
  return {worst <= kRankRatio, "worst sigma_{S+1}/sigma_1=" + fmt("%.2e", worst) + " over " +
                                    std::to_string(matrices) + " matrices"};
}

Verdict oracle_consistency() {
  Hmm m = Hmm::random(2, 3, 5, 31);
  LazyPdfTree tree(m, {OracleMode::Sampled, 0.05, 2000, 5});
  Rng rng(6);
  std::vector<std::pair<TokenString, double>> answered;
  for (int q = 0; q < 1000; ++q) {
    const int len = std::uniform_int_distribution<int>(0, 4)(rng);
    TokenString h;
    for (int i = 0; i < len; ++i) h.push_back(std::uniform_int_distribution<int>(0, 2)(rng));
    if (q % 2 == 0) {
      answered.emplace_back(h, tree.pdf(h));
    } else {
      TokenString x = concat(h, tree.cond_sample(h, rng));
      answered.emplace_back(x, tree.pdf(x));
    }
  }
  int sum_violations = 0;
  int floor_violations = 0;
  int repeat_violations = 0;
  const auto snap = tree.snapshot();
  for (const auto& [h, w] : snap) {
    for (double x : w) {
      if (x < tree.floor()) ++floor_violations;
    }
    double children = 0.0;
    for (int o = 0; o < 3; ++o) children += tree.pdf(append(h, o));
    const double parent = tree.pdf(h);
    if (std::abs(children - parent) > kUlps * kEps * parent) ++sum_violations;
  }
  std::map<TokenString, std::vector<double>> table(snap.begin(), snap.end());
  for (const auto& [x, p] : answered) {
    double again = 1.0;
    TokenString node;
    for (Token o : x) {
      again *= table.at(node)[static_cast<std::size_t>(o)];
      node.push_back(o);
    }
    if (again != p || tree.pdf(x) != p) ++repeat_violations;
  }
  Verdict v;
  v.pass = sum_violations == 0 && floor_violations == 0 && repeat_violations == 0 && tree.snapshot() == snap;
  v.detail = std::to_string(snap.size()) + " nodes; sum violations " + std::to_string(sum_violations) +
             ", floor violations " + std::to_string(floor_violations) + ", non-identical repeats " +
             std::to_string(repeat_violations);
  return v;
}

Verdict spanner_correctness() {
  Rng rng(99);
  std::normal_distribution<double> g;
  int size_fail = 0, verify_fail = 0, volume_fail = 0;
  double worst_ratio = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int d = std::uniform_int_distribution<int>(3, 20)(rng);
    const int n = std::uniform_int_distribution<int>(10, 60)(rng);
    const int s = std::uniform_int_distribution<int>(1, std::min(4, d - 1))(rng);
    const double gamma = inst % 2 ? 1e-3 : 1e-6;
    Eigen::MatrixXd raw(d, d);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = g(rng);
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
    Eigen::MatrixXd v(d, n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd in(s), out(d - s);
      for (int i = 0; i < s; ++i) in[i] = g(rng);
      for (int i = 0; i < d - s; ++i) out[i] = g(rng);
      out *= gamma * std::uniform_real_distribution<double>(0.0, 1.0)(rng) / out.norm();
      v.col(j) = q.leftCols(s) * in + q.rightCols(d - s) * out;
    }
    SpannerResult r = robust_spanner(v, s, gamma);
    if (static_cast<int>(r.indices.size()) > s || r.rank > s) ++size_fail;
    const double bound = 3.0 * gamma * s * std::sqrt(static_cast<double>(n) * d);
    SpannerCheck check = verify_spanner(v, r.indices, 2.0, bound);
    if (!check.passed) ++verify_fail;
    worst_ratio = std::max(worst_ratio, check.max_residual / bound);
    for (std::size_t i = 1; i < r.log_volume.size(); ++i) {
      if (!(r.log_volume[i] > r.log_volume[i - 1])) ++volume_fail;
    }
  }
  Verdict v;
  v.pass = size_fail == 0 && verify_fail == 0 && volume_fail == 0;
  v.detail = "50 instances; t>s " + std::to_string(size_fail) + ", verify failures " + std::to_string(verify_fail) +
             ", volume drops " + std::to_string(volume_fail) + ", worst residual/bound " + fmt("%.2e", worst_ratio);
  return v;
}

Verdict dimensionality_reduction() {
  Hmm m = Hmm::random(3, 2, 6, 41);
  std::vector<Eigen::VectorXd> dists;
  for (const TokenString& h : {TokenString{0, 0}, TokenString{0, 1}, TokenString{1, 1}}) {
    dists.push_back(to_vec(m.conditional_future_dist(h)));
  }
  const int mcount = 3;
  const int r = 3;
  const double gamma = 0.1;
  const int k = static_cast<int>(std::lround(100.0 * mcount * std::pow(r, 4) / (gamma * gamma)));
  Rng rng(43);
  WeightedSketch sk = sketch_distributions(dists, k, rng);
  CheckResult rep = check_representative(dists, sk, r, gamma, 1000, rng);
  CheckResult kl = check_kl_preserving(dists, sk, r, gamma, 0.01, 1000, rng);

  std::vector<Eigen::VectorXd> coefs;
  for (int i = 0; i < 20; ++i) coefs.push_back(random_sparse_coefficients(mcount, r, r, rng));
  const int redraws = 200;
  std::vector<std::vector<double>> values(coefs.size());
  for (int i = 0; i < redraws; ++i) {
    WeightedSketch draw = sketch_distributions(dists, k, rng);
    for (std::size_t c = 0; c < coefs.size(); ++c) values[c].push_back(sketch_l1(draw, coefs[c]));
  }
  double worst_z = 0.0;
  for (std::size_t c = 0; c < coefs.size(); ++c) {
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(dists[0].size());
    for (int i = 0; i < mcount; ++i) mix += coefs[c][i] * dists[static_cast<std::size_t>(i)];
    Eigen::Map<Eigen::VectorXd> vals(values[c].data(), redraws);
    const double mean = vals.mean();
    const double se = std::sqrt((vals.array() - mean).square().sum() / (redraws - 1) / redraws);
    const double diff = std::abs(mean - mix.lpNorm<1>());
    worst_z = std::max(worst_z, se > 0.0 ? diff / se : (diff > 0.0 ? 1e300 : 0.0));
  }
  Verdict v;
  v.pass = rep.passed && kl.passed && worst_z <= 3.0;
  v.detail = "k=" + std::to_string(k) + "; representative gap " + fmt("%.3e", rep.worst_gap) + ", KL gap " +
             fmt("%.3e", kl.worst_gap) + " (<= 0.1); unbiasedness worst |z|=" + fmt("%.2f", worst_z) + " (<= 3)";
  return v;
}

Verdict kl_contraction() {
  auto& ref = reference();
  Sampler sampler(ref.rep);
  struct Saved {
    ProjectionProblem problem;
    Eigen::VectorXd alpha;
  };
  std::vector<Saved> saved;
  sampler.set_observer([&](const ProjectionRecord& r) { saved.push_back({*r.problem, r.alpha}); });
  sampler.full_pdf();
  Rng rng(71);
  for (int i = 0; i < 200; ++i) sampler.sample(rng);
  const double eta = ref.rep.params.eta;
  int violations = 0;
  int points = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& s : saved) {
    for (const auto& a : random_feasible_points(s.problem, 100, rng)) {
      ++points;
      const double lhs = s.problem.divergence(a, s.alpha);
      const double rhs = s.problem.objective(a) + std::log(s.problem.z_norm() + eta);
      worst = std::max(worst, lhs - rhs);
      if (lhs > rhs + kContractionSlack) ++violations;
    }
  }
  Verdict v;
  v.pass = violations == 0 && !saved.empty();
  v.detail = std::to_string(saved.size()) + " projections, " + std::to_string(points) + " points; violations " +
             std::to_string(violations) + ", worst lhs-rhs " + fmt("%.3e", worst);
  return v;
}

Verdict sampler_structure() {
  auto& ref = reference();
  Sampler sampler(ref.rep);
  const double S = ref.rep.S;
  const double eta = ref.rep.params.eta;
  const double lo = 1.0 - 3.0 * S * S * eta;
  const double hi = 1.0 + 3.0 * S * S * eta;
  const double entry_floor = std::pow(sampler.truncation(), 0.1);
  int alpha_fail = 0, entry_fail = 0, sum_fail = 0, vectors = 0, projections = 0;
  double alpha_min = std::numeric_limits<double>::infinity(), alpha_max = -alpha_min, p_min = 1.0;
  double total = 0.0;
  std::function<void(const Sampler::State&, double)> walk = [&](const Sampler::State& s, double mass) {
    if (s.t == ref.rep.T) {
      total += mass;
      return;
    }
    auto p = sampler.next_char_probs(s);
    ++vectors;
    double sum = 0.0;
    for (double x : p) {
      sum += x;
      p_min = std::min(p_min, x);
      if (x < entry_floor) ++entry_fail;
    }
    if (std::abs(sum - 1.0) > kUlps * kEps) ++sum_fail;
    for (Token o = 0; o < ref.rep.O; ++o) {
      Sampler::State next = sampler.advance(s, o, p);
      ++projections;
      const double a = next.alpha.sum();
      alpha_min = std::min(alpha_min, a);
      alpha_max = std::max(alpha_max, a);
      if (a < lo || a > hi) ++alpha_fail;
      walk(next, mass * p[static_cast<std::size_t>(o)]);
    }
  };
  walk(sampler.initial_state(), 1.0);
  auto pdf = sampler.full_pdf();
  const double pdf_total = std::accumulate(pdf.begin(), pdf.end(), 0.0);
  Verdict v;
  v.pass = alpha_fail == 0 && entry_fail == 0 && sum_fail == 0 && std::abs(pdf_total - 1.0) <= kMassTolerance &&
           std::abs(total - 1.0) <= kMassTolerance;
  v.detail = std::to_string(projections) + " projections, sum(alpha) in [" + fmt("%.4f", alpha_min) + ", " +
             fmt("%.4f", alpha_max) + "] (allowed [" + fmt("%.2f", lo) + ", " + fmt("%.2f", hi) + "]); " +
             std::to_string(vectors) + " p-vectors, min entry " + fmt("%.3e", p_min) + " (>= " +
             fmt("%.1e", entry_floor) + "), sum errors " + std::to_string(sum_fail) + "; total mass " +
             fmt("%.15f", pdf_total);
  return v;
}

Verdict truncated_kl_values() {
  const double value = trunc_kl_vec(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.05, 0.95), 0.1);
  bool identities = true;
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    const double c = std::abs(u(rng)) + 1e-6;
    identities = identities && trunc_kl_scalar(x, x, c) == 0.0;
    const double below_x = c * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const double below_y = c * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    identities = identities && trunc_kl_scalar(below_x, below_y, c) == 0.0;
  }
  Verdict v;
  v.pass = std::abs(value - kKlValue) <= kKlTolerance && identities;
  v.detail = "value " + fmt("%.6f", value) + " (0.48375 +- 1e-4); identities " + (identities ? "exact" : "violated");
  return v;
}

}  // namespace

int main() {
  report(1, "end-to-end stealing", end_to_end);
  report(2, "rank certificate", rank_certificate);
  report(3, "oracle consistency and positivity", oracle_consistency);
  report(4, "spanner correctness", spanner_correctness);
  report(5, "dimensionality reduction", dimensionality_reduction);
  report(6, "KL projection contraction", kl_contraction);
  report(7, "sampler structure", sampler_structure);
  report(8, "truncated KL values", truncated_kl_values);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
