#include "seqsteal/sampler.hpp"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "seqsteal/errors.hpp"
#include "seqsteal/harness.hpp"
#include "seqsteal/hmm.hpp"

namespace seqsteal {
namespace {

ProjectionProblem small_problem() {
  ProjectionProblem p;
  p.R.resize(2, 4);
  p.R << 0.4, 0.3, 0.2, 0.1,
         0.1, 0.1, 0.3, 0.5;
  p.z = Eigen::Vector4d(0.35, 0.15, 0.1, 0.4);
  p.floor = Eigen::Vector4d::Constant(1e-3);
  p.weight = Eigen::Vector4d::Ones();
  p.bound = 4.0;
  return p;
}

TEST(RoundDist, ClampsAndNormalizes) {
  auto p = round_dist({-0.1, 0.5, 0.6}, 0.1);
  EXPECT_NEAR(p[0], 0.1 / 1.2, 1e-15);
  EXPECT_NEAR(p[1], 0.5 / 1.2, 1e-15);
  EXPECT_NEAR(p[2], 0.5, 1e-15);
  EXPECT_EQ(p[0] + p[1] + p[2], 1.0);
  EXPECT_THROW(round_dist({0.5}, 0.0), ParameterError);
}

TEST(KlProject, MatchesGridSearch) {
  ProjectionProblem p = small_problem();
  ProjectionResult res = kl_project(p);
  EXPECT_TRUE(p.feasible(res.alpha, 1e-9));
  // One free direction: alpha_1 on a grid, alpha_2 from the mass equality.
  const Eigen::VectorXd g = p.mass();
  double best = std::numeric_limits<double>::infinity();
  for (double a = -p.bound; a <= p.bound; a += 1e-3) {
    Eigen::Vector2d alpha(a, (1.0 - g[0] * a) / g[1]);
    if (p.feasible(alpha, 1e-12)) best = std::min(best, p.objective(alpha));
  }
  EXPECT_LE(res.objective, best + 1e-8);
  EXPECT_GE(res.objective, best - 1e-2);
  EXPECT_NEAR(res.objective, p.objective(res.alpha), 1e-15);
}

TEST(KlProject, SingleCoefficientIsForced) {
  ProjectionProblem p;
  p.R.resize(1, 3);
  p.R << 0.2, 0.3, 0.1;
  p.z = Eigen::Vector3d(0.3, 0.3, 0.3);
  p.floor = Eigen::Vector3d::Constant(1e-4);
  p.weight = Eigen::Vector3d(1.0, 2.0, 1.0);
  p.bound = 2.0;
  ProjectionResult res = kl_project(p);
  EXPECT_NEAR(res.alpha[0], 1.0 / 0.9, 1e-15);
}

TEST(KlProject, NamesInfeasibleFamily) {
  ProjectionProblem box = small_problem();
  box.bound = 0.4;
  try {
    kl_project(box);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("coefficient box"), std::string::npos);
  }
  ProjectionProblem floor = small_problem();
  floor.floor = Eigen::Vector4d::Constant(0.3);
  try {
    kl_project(floor);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("entrywise floor"), std::string::npos);
  }
}

TEST(KlProject, RandomFeasiblePointsAreFeasibleAndNoBetter) {
  ProjectionProblem p = small_problem();
  ProjectionResult res = kl_project(p);
  Rng rng(3);
  auto pts = random_feasible_points(p, 50, rng);
  ASSERT_EQ(pts.size(), 50u);
  for (const auto& a : pts) {
    EXPECT_TRUE(p.feasible(a, 1e-9));
    EXPECT_GE(p.objective(a), res.objective - 1e-8);
  }
}

TEST(Truncation, ClampedInLogSpace) {
  EXPECT_NEAR(effective_truncation(0.05, 2, 5, 2, 1e-40), 1e-40, 1e-52);
  EXPECT_NEAR(effective_truncation(0.5, 1, 1, 1, 1e-40), std::pow(0.5, 10), 1e-15);
  EXPECT_THROW(effective_truncation(1.5, 2, 2, 2, 1e-40), ParameterError);
}

struct Learned {
  Hmm hmm;
  LazyPdfTree tree;
  LearnedRepresentation rep;
  Learned(Hmm h, int S) : hmm(std::move(h)), tree(hmm, {OracleMode::ExactBase, 0.01, 1, 0}), rep(learn(tree, S, {})) {}
};

Learned& reference() {
  static Learned run(Hmm::random(2, 2, 5, 7), 2);
  return run;
}

TEST(Sampler, DeterministicPerSeed) {
  Sampler s(reference().rep);
  std::vector<TraceStep> a, b;
  EXPECT_EQ(s.sample(5u, &a), s.sample(5u, &b));
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].p, b[i].p);
  EXPECT_NEAR(s.truncation(), 1e-40, 1e-52);
  EXPECT_NEAR(s.rounding_threshold(), 2e-4, 1e-18);
}

TEST(Sampler, PdfSumsToOneAndMatchesRecursion) {
  Sampler s(reference().rep);
  auto all = s.full_pdf();
  EXPECT_NEAR(std::accumulate(all.begin(), all.end(), 0.0), 1.0, 1e-12);
  for (const auto& x : enumerate_strings(2, 5)) EXPECT_EQ(s.pdf(x), all[string_index(x, 2)]);
  EXPECT_THROW(s.pdf({0, 1}), LengthError);
}

TEST(Sampler, FrequenciesMatchPdf) {
  Sampler s(reference().rep);
  auto pdf = s.full_pdf();
  Rng rng(8);
  const int n = 20000;
  std::vector<double> counts(pdf.size(), 0.0);
  for (int i = 0; i < n; ++i) counts[string_index(s.sample(rng), 2)] += 1.0;
  for (std::size_t i = 0; i < pdf.size(); ++i) {
    const double sd = std::sqrt(n * pdf[i] * (1.0 - pdf[i]));
    EXPECT_LE(std::abs(counts[i] - n * pdf[i]), 3.0 * sd + 1.0) << "string " << i;
  }
}

TEST(Sampler, IidModelReproduced) {
  Eigen::VectorXd mu(1);
  mu << 1.0;
  Eigen::MatrixXd trans(1, 1);
  trans << 1.0;
  Eigen::MatrixXd emit(3, 1);
  emit << 0.5, 0.3, 0.2;
  Learned run(Hmm(mu, trans, emit, 4), 1);
  Sampler s(run.rep);
  Rng rng(9);
  const int n = 20000;
  std::vector<std::vector<double>> freq(4, std::vector<double>(3, 0.0));
  for (int i = 0; i < n; ++i) {
    TokenString x = s.sample(rng);
    for (int t = 0; t < 4; ++t) freq[t][static_cast<std::size_t>(x[t])] += 1.0 / n;
  }
  for (int t = 0; t < 4; ++t) {
    for (int o = 0; o < 3; ++o) EXPECT_NEAR(freq[t][o], emit(o, 0), 0.03);
  }
  const auto& hmm = run.hmm;
  double tv = tv_exact([&](const TokenString& x) { return s.pdf(x); },
                       [&](const TokenString& x) { return hmm.sequence_prob(x); }, 3, 4);
  EXPECT_LE(tv, 0.05);
}

TEST(Sampler, ObserverSeesEveryProjection) {
  Sampler s(reference().rep);
  int seen = 0;
  s.set_observer([&](const ProjectionRecord& r) {
    ++seen;
    ASSERT_NE(r.problem, nullptr);
    EXPECT_TRUE(r.problem->feasible(r.alpha, 1e-8));
  });
  s.sample(3u);
  EXPECT_EQ(seen, 5);
  EXPECT_EQ(s.stats().projections, 5u);
}

TEST(Sampler, StepApiAgreesWithPdf) {
  Sampler s(reference().rep);
  TokenString x{1, 0, 0, 1, 1};
  auto st = s.initial_state();
  double p = 1.0;
  for (Token o : x) {
    auto probs = s.next_char_probs(st);
    p *= probs[static_cast<std::size_t>(o)];
    st = s.advance(st, o, probs);
  }
  EXPECT_EQ(p, s.pdf(x));
  EXPECT_THROW(s.next_char_probs(st), LengthError);
}

}  // namespace
}  // namespace seqsteal
