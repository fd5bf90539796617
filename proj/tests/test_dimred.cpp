#include "seqsteal/dimred.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "seqsteal/errors.hpp"
#include "seqsteal/hmm.hpp"

namespace seqsteal {
namespace {

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<Eigen::VectorXd> random_dists(int m, int n, Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < m; ++i) out.push_back(to_vec(uniform_simplex(n, rng)));
  return out;
}

TEST(TruncKl, ScalarValues) {
  EXPECT_EQ(trunc_kl_scalar(0.3, 0.3, 0.1), 0.0);
  EXPECT_EQ(trunc_kl_scalar(0.05, 0.01, 0.1), 0.0);
  EXPECT_NEAR(trunc_kl_scalar(0.5, 0.05, 0.1), 0.80472, 1e-5);
  EXPECT_THROW(trunc_kl_scalar(0.5, 0.5, 0.0), ParameterError);
}

TEST(TruncKl, VectorValues) {
  Eigen::Vector2d p(0.5, 0.5);
  Eigen::Vector2d q(0.05, 0.95);
  EXPECT_NEAR(trunc_kl_vec(p, q, 0.1), 0.48375, 1e-4);
  EXPECT_EQ(trunc_kl_vec(p, p, 0.1), 0.0);
  EXPECT_THROW(trunc_kl_vec(p, Eigen::Vector3d(0.2, 0.3, 0.5), 0.1), LengthError);
  const double kl = 0.5 * std::log(0.5 / 0.05) + 0.5 * std::log(0.5 / 0.95);
  EXPECT_NEAR(trunc_kl_vec(p, q, 1e-300), kl, 1e-9);
  Eigen::Vector2d weight(2.0, 3.0);
  EXPECT_NEAR(trunc_kl_weighted(p, q, Eigen::Vector2d(0.1, 0.1), weight),
              2.0 * trunc_kl_scalar(0.5, 0.05, 0.1) + 3.0 * trunc_kl_scalar(0.5, 0.95, 0.1), 1e-15);
}

TEST(TruncKl, NonincreasingInSecondArgument) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd a(4), b(4), w(4);
    for (int i = 0; i < 4; ++i) {
      w[i] = 0.01 + 0.1 * u(rng);
      a[i] = w[i] + u(rng);
      b[i] = u(rng);
    }
    Eigen::VectorXd bumped = b;
    bumped[trial % 4] += 0.1;
    EXPECT_LE(trunc_kl_vec(a, bumped, w), trunc_kl_vec(a, b, w) + 1e-15);
  }
}

TEST(TruncKl, LipschitzInFirstArgument) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_real_distribution<double> lw(-3.0, 0.0);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 5;
    Eigen::VectorXd a(n), b(n), w(n), dir(n);
    for (int i = 0; i < n; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      w[i] = std::pow(10.0, lw(rng));
      dir[i] = g(rng);
    }
    dir /= dir.lpNorm<1>();
    const double step = 1e-3 * u(rng);
    Eigen::VectorXd a2 = a + step * dir;
    const double slope = std::abs(trunc_kl_vec(a2, b, w) - trunc_kl_vec(a, b, w)) / step;
    const double u_inf = std::max(a.cwiseAbs().maxCoeff(), a2.cwiseAbs().maxCoeff());
    const double bound = 1.0 + std::log(1.0 + 1.0 / w.minCoeff()) + std::log(1.0 + w.maxCoeff()) +
                         std::log(1.0 + u_inf) + std::log(1.0 + b.cwiseAbs().maxCoeff());
    EXPECT_LE(slope, bound + 1e-9);
  }
}

TEST(BuildVectors, SingleHistoryIsFlat) {
  Hmm m = Hmm::random(2, 2, 5, 3);
  LazyPdfTree tree(m, {OracleMode::ExactBase, 0.01, 1, 0});
  Rng rng(1);
  std::vector<TokenString> hs{{1, 0}};
  SketchBundle b = build_vectors(tree, 2, hs, 40, rng);
  ASSERT_EQ(b.u[0].size(), 40);
  for (Eigen::Index i = 0; i < 40; ++i) EXPECT_NEAR(b.u[0][i], 1.0 / 40.0, 1e-17);
  EXPECT_NEAR(b.u[0].sum(), 1.0, 1e-14);
}

TEST(BuildVectors, NormsNearOneAndEntriesBounded) {
  Hmm m = Hmm::random(3, 2, 6, 4);
  LazyPdfTree tree(m, {OracleMode::ExactBase, 0.01, 1, 0});
  Rng rng(2);
  std::vector<TokenString> hs = enumerate_strings(2, 2);
  SketchBundle b = build_vectors(tree, 2, hs, 5000, rng);
  EXPECT_EQ(b.futures.size(), 4u * 5000u);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    EXPECT_GE(b.u[i].sum(), 0.95);
    EXPECT_LE(b.u[i].sum(), 1.05);
    EXPECT_LE(b.u[i].maxCoeff(), 1.0);
    EXPECT_GE(b.u[i].minCoeff(), 0.0);
    // u is w times the conditional law on the sampled futures.
    for (std::size_t j = 0; j < 50; ++j) {
      const double p = tree.conditional_pdf(hs[i], b.futures[j]);
      EXPECT_NEAR(b.u[i][static_cast<Eigen::Index>(j)], b.w[static_cast<Eigen::Index>(j)] * p, 1e-15);
    }
  }
  EXPECT_GT(b.w.minCoeff(), 0.0);
  EXPECT_TRUE(b.w.allFinite());
  EXPECT_EQ(b.u_of(hs[2]), b.u[2]);
  EXPECT_THROW(b.u_of({0}), Error);
}

TEST(Representative, TrivialCoefficients) {
  Rng rng(3);
  auto dists = random_dists(3, 16, rng);
  WeightedSketch sk = sketch_distributions(dists, 200, rng);
  EXPECT_EQ(representation_gap(dists, sk, Eigen::Vector3d::Zero()), 0.0);
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d e = Eigen::Vector3d::Unit(i);
    EXPECT_NEAR(representation_gap(dists, sk, e), std::abs(1.0 - sk.count.dot(sk.u[i])), 1e-15);
  }
}

TEST(Representative, MergedAndFullFormsAgree) {
  Hmm m = Hmm::random(2, 2, 5, 6);
  LazyPdfTree tree(m, {OracleMode::ExactBase, 0.01, 1, 0});
  Rng rng(4);
  std::vector<TokenString> hs{{0, 0}, {0, 1}, {1, 1}};
  SketchBundle b = build_vectors(tree, 2, hs, 300, rng);
  std::vector<Eigen::VectorXd> dists;
  for (const auto& h : hs) dists.push_back(to_vec(tree.conditional_dist(h)));
  WeightedSketch merged = merge_coordinates(b.u, b.w);
  EXPECT_LE(merged.u[0].size(), 8);
  EXPECT_EQ(merged.count.sum(), 900.0);
  Rng a(9), c(9);
  CheckResult full = check_representative(dists, b.u, 3, 1.0, 50, a);
  CheckResult short_form = check_representative(dists, merged, 3, 1.0, 50, c);
  EXPECT_NEAR(full.worst_gap, short_form.worst_gap, 1e-12);
}

TEST(Representative, PassesAtPrescribedSketchSize) {
  Rng rng(5);
  auto dists = random_dists(3, 16, rng);
  const int r = 3;
  const double gamma = 0.1;
  const int k = static_cast<int>(std::lround(100.0 * 3 * std::pow(r, 4) / (gamma * gamma)));
  WeightedSketch sk = sketch_distributions(dists, k, rng);
  CheckResult res = check_representative(dists, sk, r, gamma, 1000, rng);
  EXPECT_TRUE(res.passed) << res.worst_gap;
}

TEST(KlPreserving, TrivialCases) {
  Rng rng(6);
  auto dists = random_dists(3, 16, rng);
  WeightedSketch sk = sketch_distributions(dists, 500, rng);
  Eigen::Vector3d c(0.5, -0.2, 1.0);
  KlPair same = kl_preservation_pair(dists, sk, c, c, 0.3);
  EXPECT_EQ(same.exact, 0.0);
  EXPECT_EQ(same.sketched, 0.0);
  Eigen::Vector3d d(0.2, 0.3, 0.5);
  KlPair clamped = kl_preservation_pair(dists, sk, d, c, 1.0);
  EXPECT_EQ(clamped.exact, 0.0);
  EXPECT_EQ(clamped.sketched, 0.0);
}

TEST(KlPreserving, PassesAtPrescribedSketchSize) {
  Rng rng(7);
  auto dists = random_dists(3, 16, rng);
  const int r = 3;
  const double gamma = 0.1;
  const int k = static_cast<int>(std::lround(100.0 * 3 * std::pow(r, 4) / (gamma * gamma)));
  WeightedSketch sk = sketch_distributions(dists, k, rng);
  CheckResult res = check_kl_preserving(dists, sk, r, gamma, 0.01, 1000, rng);
  EXPECT_TRUE(res.passed) << res.worst_gap;
}

TEST(Sketch, UnbiasedOverRedraws) {
  Rng rng(8);
  auto dists = random_dists(3, 16, rng);
  std::vector<Eigen::VectorXd> coefs;
  for (int i = 0; i < 20; ++i) coefs.push_back(random_sparse_coefficients(3, 3, 3.0, rng));
  const int redraws = 200;
  std::vector<std::vector<double>> values(coefs.size());
  for (int d = 0; d < redraws; ++d) {
    WeightedSketch sk = sketch_distributions(dists, 50, rng);
    for (std::size_t i = 0; i < coefs.size(); ++i) values[i].push_back(sketch_l1(sk, coefs[i]));
  }
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(16);
    for (int j = 0; j < 3; ++j) mix += coefs[i][j] * dists[static_cast<std::size_t>(j)];
    const double exact = mix.lpNorm<1>();
    Eigen::Map<Eigen::VectorXd> v(values[i].data(), redraws);
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().sum() / (redraws - 1));
    EXPECT_LE(std::abs(mean - exact), 3.0 * sd / std::sqrt(static_cast<double>(redraws)) + 1e-12);
  }
}

TEST(Sketch, SparseCoefficientShape) {
  Rng rng(10);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd c = random_sparse_coefficients(6, 3, 2.5, rng);
    const int nnz = static_cast<int>((c.array() != 0.0).count());
    EXPECT_GE(nnz, 1);
    EXPECT_LE(nnz, 3);
    EXPECT_LE(c.cwiseAbs().maxCoeff(), 2.5);
  }
}

struct AuditInstance {
  std::vector<Eigen::VectorXd> exact;
  std::vector<Eigen::VectorXd> surrogate;
  std::vector<std::vector<std::uint64_t>> samples;
};

AuditInstance audit_instance(const Hmm& m, double eps, std::uint64_t seed) {
  LazyPdfTree tree(m, {OracleMode::Perturbed, eps, 1, seed});
  Rng rng(seed);
  AuditInstance out;
  for (const TokenString& h : {TokenString{0}, TokenString{1}}) {
    out.exact.push_back(to_vec(m.conditional_future_dist(h)));
    out.surrogate.push_back(to_vec(tree.conditional_dist(h)));
    std::vector<std::uint64_t> xs;
    for (int i = 0; i < 20; ++i) xs.push_back(string_index(tree.cond_sample(h, rng), 2));
    out.samples.push_back(std::move(xs));
  }
  return out;
}

TEST(PerturbationAudit, ZeroWhenIdentical) {
  Hmm m = Hmm::random(2, 2, 4, 3);
  auto inst = audit_instance(m, 0.1, 1);
  EXPECT_EQ(perturbation_audit(inst.exact, inst.exact, inst.samples), 0.0);
}

TEST(PerturbationAudit, SmallForSmallPerturbations) {
  Hmm m = Hmm::random(2, 2, 4, 3);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto inst = audit_instance(m, 1e-4, seed);
    if (perturbation_audit(inst.exact, inst.surrogate, inst.samples) <= 1e-2) ++good;
  }
  EXPECT_GE(good, 95);
}

}  // namespace
}  // namespace seqsteal
