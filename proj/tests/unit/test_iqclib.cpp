#include <gtest/gtest.h>

#include <cmath>

#include "keepclose/iqclib.hpp"
#include "keepclose/scenarios.hpp"
#include "test_util.hpp"

using namespace keepclose;

namespace {

constexpr double kDt = 1e-3;

Mat sampled(double T, const std::function<double(double)>& f) {
  const int n = static_cast<int>(std::lround(T / kDt)) + 1;
  Mat out(n, 1);
  for (int i = 0; i < n; ++i) out(i, 0) = f(i * kDt);
  return out;
}

}  // namespace

TEST(Iqc, SectorFactorShape) {
  auto f = sector_iqc(Vec::Zero(1), Vec::Constant(1, 0.364));
  EXPECT_TRUE(f.is_static());
  EXPECT_EQ(f.r_dim(), 2);
  EXPECT_DOUBLE_EQ(f.Dp(0, 0), 0.364);
  EXPECT_DOUBLE_EQ(f.Dq(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(f.M(0, 1), 1.0);
  EXPECT_KC_ERROR(sector_iqc(Vec::Constant(1, 1.0), Vec::Constant(1, 0.0)), ErrorCode::BoundOrder);
}

TEST(Iqc, SectorIntegrandPointwiseNonnegative) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 2000; ++k) {
    const double a = kctest::uniform(rng, -1, 1), b = a + kctest::uniform(rng, 0, 1);
    auto f = sector_iqc(Vec::Constant(1, a), Vec::Constant(1, b));
    const double p = kctest::uniform(rng, -3, 3);
    const double q = p * kctest::uniform(rng, a, b);
    const Vec r = f.Dp.col(0) * p + f.Dq.col(0) * q;
    EXPECT_GE(r.dot(f.M * r), -1e-12);
    EXPECT_NEAR(r.dot(f.M * r), 2 * (b * p - q) * (q - a * p), 1e-12);
  }
}

TEST(Iqc, DegenerateSectorVanishesOnGraph) {
  auto f = sector_iqc(Vec::Constant(1, 0.4), Vec::Constant(1, 0.4));
  const Mat p = sampled(5, [](double t) { return std::cos(t); });
  const Mat q = 0.4 * p;
  for (double v : hard_iqc_prefix(f, p, q, kDt)) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Iqc, SectorQuadratureOracle) {
  auto f = sector_iqc(Vec::Zero(1), Vec::Constant(1, 0.364));
  const Mat p = sampled(10, [](double t) { return std::sin(t); });
  const Mat q = 0.2 * p;
  // 2 (0.364 - 0.2) * 0.2 * int_0^10 sin^2 = 0.0656 (5 - sin(20)/4).
  const double expected = 2 * 0.164 * 0.2 * (5.0 - std::sin(20.0) / 4.0);
  EXPECT_NEAR(eval_hard_iqc(f, p, q, kDt, 10.0), expected, 1e-6);
  EXPECT_GT(eval_hard_iqc(f, p, q, kDt, 10.0), 0.0);
}

TEST(Iqc, NormBoundExamples) {
  const Mat p = sampled(4, [](double t) { return std::sin(2 * t) + 0.5; });
  auto f = norm_bound_iqc(0.2);
  const double p2 = eval_hard_iqc(norm_bound_iqc(1.0), p, Mat::Zero(p.rows(), 1), kDt, 4.0);
  EXPECT_NEAR(eval_hard_iqc(f, p, 0.1 * p, kDt, 4.0), (0.04 - 0.01) * p2, 1e-12);
  EXPECT_LT(eval_hard_iqc(f, p, 0.3 * p, kDt, 4.0), 0.0);
  auto zero = norm_bound_iqc(0.0);
  EXPECT_NEAR(eval_hard_iqc(zero, p, Mat::Zero(p.rows(), 1), kDt, 4.0), 0.0, 1e-15);
  EXPECT_LT(eval_hard_iqc(zero, p, 1e-3 * p, kDt, 4.0), 0.0);
  EXPECT_KC_ERROR(norm_bound_iqc(-1.0), ErrorCode::NegativeBound);
}

TEST(Iqc, CombineLayout) {
  auto s = sector_iqc(Vec::Zero(1), Vec::Constant(1, 0.364));
  auto n = norm_bound_iqc(0.2);
  auto c = combine({s, n});
  EXPECT_EQ(c.M.rows(), 4);
  EXPECT_TRUE(c.is_static());
  EXPECT_EQ(c.q_dim(), 2);
  EXPECT_EQ(c.p_dim(), 2);
  EXPECT_TRUE(c.M.topRightCorner(2, 2).isZero());
  EXPECT_EQ(c.M.bottomRightCorner(2, 2), n.M);
  EXPECT_EQ(c.blocks, (std::vector<int>{2, 2}));
  auto single = combine({s});
  EXPECT_EQ(single.M, s.M);
  EXPECT_EQ(single.Dp, s.Dp);
  EXPECT_KC_ERROR(combine({}), ErrorCode::EmptyList);
}

TEST(Iqc, CombineIsAssociative) {
  auto a = sector_iqc(Vec::Zero(1), Vec::Ones(1));
  auto b = norm_bound_iqc(0.3);
  auto c = sector_iqc(Vec::Constant(1, -1), Vec::Zero(1));
  auto left = combine({combine({a, b}), c});
  auto right = combine({a, combine({b, c})});
  EXPECT_EQ(left.M, right.M);
  EXPECT_EQ(left.Dp, right.Dp);
  EXPECT_EQ(left.Dq, right.Dq);
}

TEST(Iqc, QuadraticInSignalScaling) {
  auto f = combine({sector_iqc(Vec::Zero(1), Vec::Ones(1)), norm_bound_iqc(0.5)});
  std::mt19937_64 rng(4);
  Mat p(1001, 2), q(1001, 2);
  for (int i = 0; i < 1001; ++i) {
    p.row(i) = kctest::random_vector(rng, 2).transpose();
    q.row(i) = kctest::random_vector(rng, 2).transpose();
  }
  const double base = eval_hard_iqc(f, p, q, kDt, 1.0);
  EXPECT_NEAR(eval_hard_iqc(f, 3.0 * p, 3.0 * q, kDt, 1.0), 9.0 * base, 1e-9 * std::abs(base) + 1e-12);
}

TEST(Iqc, ZeroQBranch) {
  auto f = sector_iqc(Vec::Zero(1), Vec::Constant(1, 0.5));
  const Mat p = sampled(2, [](double t) { return t; });
  EXPECT_DOUBLE_EQ(eval_hard_iqc(f, p, Mat::Zero(p.rows(), 1), kDt, 2.0), 0.0);
}

TEST(Iqc, ArmDeltaAlongTrajectory) {
  auto f = arm_delta_class().factor();
  const Mat th = sampled(20, [](double t) { return 1.4 * std::sin(0.7 * t) * std::cos(0.13 * t); });
  Mat q = th;
  for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, 0) = arm_delta(th(i, 0));
  for (double v : hard_iqc_prefix(f, th, q, kDt)) EXPECT_GE(v, -1e-9);
}

TEST(Iqc, ViolationDetected) {
  auto f = sector_iqc(Vec::Zero(1), Vec::Constant(1, 0.364));
  const Mat p = sampled(3, [](double t) { return std::sin(t); });
  Mat q = 0.1 * p;
  for (Eigen::Index i = 1000; i < 2000; ++i) q(i, 0) = 0.8 * p(i, 0);
  const auto prefix = hard_iqc_prefix(f, p, q, kDt);
  EXPECT_LT(*std::min_element(prefix.begin(), prefix.end()), 0.0);
}

TEST(Iqc, GridChecks) {
  auto f = sector_iqc(Vec::Zero(1), Vec::Ones(1));
  EXPECT_KC_ERROR(eval_hard_iqc(f, Mat::Zero(10, 1), Mat::Zero(11, 1), kDt, 0.005), ErrorCode::GridMismatch);
  EXPECT_KC_ERROR(eval_hard_iqc(f, Mat::Zero(10, 1), Mat::Zero(10, 1), kDt, 0.0555), ErrorCode::GridMismatch);
}

TEST(Iqc, DynamicFilterIntegration) {
  // psi' = -psi + p, r = (psi, q), M = diag(1, 0): integral of psi^2 for a unit step.
  IqcFactor f;
  f.A = Mat::Constant(1, 1, -1.0);
  f.Bp = Mat::Constant(1, 1, 1.0);
  f.Bq = Mat::Zero(1, 1);
  f.C = Mat::Zero(2, 1);
  f.C(0, 0) = 1.0;
  f.Dp = Mat::Zero(2, 1);
  f.Dq = Mat::Zero(2, 1);
  f.Dq(1, 0) = 1.0;
  f.M = Mat::Zero(2, 2);
  f.M(0, 0) = 1.0;
  f.blocks = {2};
  const Mat p = Mat::Ones(2001, 1);
  const double T = 2.0;
  const double expected = T - 2 * (1 - std::exp(-T)) + 0.5 * (1 - std::exp(-2 * T));
  EXPECT_NEAR(eval_hard_iqc(f, p, Mat::Zero(2001, 1), kDt, T), expected, 1e-6);
}

TEST(Iqc, UncertaintyJson) {
  auto u = uncertainty_from_json(nlohmann::json::parse(R"({"kind":"sector","alpha":[0],"beta":[0.364]})"));
  EXPECT_EQ(u.kind, UncertaintyClass::Kind::Sector);
  EXPECT_DOUBLE_EQ(u.beta[0], 0.364);
  auto n = uncertainty_from_json(nlohmann::json::parse(R"({"kind":"norm","c":0.2})"));
  EXPECT_DOUBLE_EQ(n.c, 0.2);
  auto back = uncertainty_from_json(to_json(u));
  EXPECT_EQ(back.alpha, u.alpha);
  EXPECT_KC_ERROR(uncertainty_from_json(nlohmann::json::parse(R"({"kind":"zames"})")), ErrorCode::InputError);
}
