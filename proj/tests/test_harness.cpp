#include "seqsteal/harness.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace seqsteal {
namespace {

TEST(Tv, ExactValues) {
  EXPECT_NEAR(tv_exact({0.5, 0.5}, {0.6, 0.4}), 0.1, 1e-15);
  EXPECT_EQ(tv_exact({0.2, 0.8}, {0.2, 0.8}), 0.0);
  EXPECT_EQ(tv_exact({1.0, 0.0}, {0.0, 1.0}), 1.0);
  EXPECT_THROW(tv_exact({1.0}, {0.5, 0.5}), LengthError);
}

TEST(Tv, ExactIsSymmetric) {
  Hmm a = Hmm::random(2, 2, 4, 1);
  Hmm b = Hmm::random(2, 2, 4, 2);
  auto pa = [&](const TokenString& x) { return a.sequence_prob(x); };
  auto pb = [&](const TokenString& x) { return b.sequence_prob(x); };
  EXPECT_EQ(tv_exact(pa, pb, 2, 4), tv_exact(pb, pa, 2, 4));
  EXPECT_EQ(tv_exact(pa, pa, 2, 4), 0.0);
  EXPECT_THROW(tv_exact(pa, pb, 2, 30), GuardError);
}

TEST(Tv, EmpiricalPointMassAgainstUniform) {
  Rng rng(1);
  TvEstimate est = tv_empirical([](Rng&) { return TokenString{0}; }, [](const TokenString&) { return 0.5; }, 2000, rng);
  EXPECT_NEAR(est.estimate, 0.5, 1e-15);
  EXPECT_LE(est.ci_low, est.estimate);
  EXPECT_GE(est.ci_high, est.estimate);
  EXPECT_EQ(est.n, 2000);
  EXPECT_THROW(tv_empirical([](Rng&) { return TokenString{0}; }, [](const TokenString&) { return 0.5; }, 10, rng),
               ParameterError);
}

TEST(Tv, EmpiricalCoversExact) {
  Hmm a = Hmm::random(2, 2, 4, 3);
  Hmm b = Hmm::random(2, 2, 4, 4);
  Rng rng(2);
  TvEstimate est = tv_empirical([&](Rng& r) { return a.conditional_sample({}, r); },
                                [&](const TokenString& x) { return b.sequence_prob(x); }, 20000, rng);
  const double exact = tv_exact([&](const TokenString& x) { return a.sequence_prob(x); },
                                [&](const TokenString& x) { return b.sequence_prob(x); }, 2, 4);
  EXPECT_NEAR(est.estimate, exact, 0.02);
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.out_dir.clear();
  c.audit_params.histories_per_level = 10;
  return c;
}

TEST(Pipeline, ReproducibleModuloTiming) {
  ExperimentConfig c = small_config();
  RunReport a = run_pipeline(c);
  RunReport b = run_pipeline(c);
  EXPECT_EQ(a.to_json(false), b.to_json(false));
  EXPECT_TRUE(a.to_json(true).contains("timing"));
  EXPECT_FALSE(a.to_json(false).contains("timing"));
  EXPECT_LE(a.tv, 0.15);
  ASSERT_TRUE(a.learned_mass.has_value());
  EXPECT_NEAR(*a.learned_mass, 1.0, 1e-6);
}

TEST(Pipeline, ConfigJsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.learner.k = 100;
  c.oracle.mode = OracleMode::Perturbed;
  ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto partial = nlohmann::json::object();
  partial["hmm"] = {{"S", 1}};
  ExperimentConfig filled = ExperimentConfig::from_json(partial);
  EXPECT_EQ(filled.S, 1);
  EXPECT_EQ(filled.T, 5);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  ExperimentConfig bad = small_config();
  bad.eval_mode = "nope";
  try {
    run_pipeline(bad);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  ExperimentConfig missing = small_config();
  missing.hmm_file = "/nonexistent/hmm.json";
  try {
    run_pipeline(missing);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "hmm");
  }
  ExperimentConfig too_big = small_config();
  too_big.S = 1;
  too_big.T = 24;
  too_big.learner.k = 8;
  too_big.learner.N = 2;
  too_big.audit = false;
  try {
    run_pipeline(too_big);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "eval");
  }
}

TEST(Pipeline, EmpiricalModeReportsInterval) {
  ExperimentConfig c = small_config();
  c.eval_mode = "empirical";
  c.eval_samples = 5000;
  c.audit = false;
  RunReport r = run_pipeline(c);
  EXPECT_EQ(r.tv_method, "empirical");
  EXPECT_LE(r.tv_ci_low, r.tv);
  EXPECT_GE(r.tv_ci_high, r.tv);
  EXPECT_FALSE(r.learned_mass.has_value());
}

}  // namespace
}  // namespace seqsteal
