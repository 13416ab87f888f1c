#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "keepclose/scenarios.hpp"
#include "keepclose/simkit.hpp"
#include "test_util.hpp"

using namespace keepclose;

namespace {

Loop scalar_loop(std::function<double(double)> f) {
  Loop l;
  l.field = [f](const Vec& x, const Vec&, double) { return Vec(Vec::Constant(1, f(x[0]))); };
  l.output = [](const Vec& x, double) { return x; };
  l.controller = [](const Vec&, double) { return Vec(Vec::Zero(1)); };
  return l;
}

Mat column(int n, double dt, const std::function<double(double)>& f) {
  Mat m(n, 1);
  for (int i = 0; i < n; ++i) m(i, 0) = f(i * dt);
  return m;
}

}  // namespace

TEST(SimKit, ExponentialDecayOracle) {
  const auto l = scalar_loop([](double x) { return -x; });
  const auto tr = simulate_closed_loop(l, l, Vec::Ones(1), Vec::Ones(1), 1.0, 1e-3);
  EXPECT_NEAR(tr.x(tr.samples() - 1, 0), std::exp(-1.0), 1e-9);
  EXPECT_EQ(tr.samples(), 1001);
  EXPECT_DOUBLE_EQ(tr.t[1000], 1.0);
}

TEST(SimKit, ZeroFieldIsConstant) {
  const auto l = scalar_loop([](double) { return 0.0; });
  const auto tr = simulate_closed_loop(l, l, Vec::Constant(1, 2.5), Vec::Constant(1, 2.5), 3.0, 0.01);
  EXPECT_TRUE((tr.x.array() == 2.5).all());
  EXPECT_TRUE(tr.z().isZero());
}

TEST(SimKit, FiniteEscapeAborts) {
  const auto blow = scalar_loop([](double x) { return x * x; });
  const auto calm = scalar_loop([](double) { return 0.0; });
  try {
    simulate_closed_loop(blow, calm, Vec::Ones(1), Vec::Ones(1), 2.0, 1e-3);
    FAIL() << "expected NonFiniteState";
  } catch (const NonFiniteStateError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
    ASSERT_GT(e.partial().samples(), 0);
    EXPECT_LT(e.partial().t[e.partial().samples() - 1], 1.05);
    EXPECT_TRUE(e.partial().x.allFinite());
  }
}

TEST(SimKit, ControlHoldMode) {
  Loop l;
  l.field = [](const Vec& x, const Vec& u, double) { return Vec(-x + u); };
  l.output = [](const Vec& x, double) { return x; };
  l.controller = [](const Vec&, double t) { return Vec(Vec::Constant(1, t)); };
  SimOptions hold;
  hold.control_hold = true;
  const auto a = simulate_closed_loop(l, l, Vec::Zero(1), Vec::Zero(1), 1.0, 0.1);
  const auto b = simulate_closed_loop(l, l, Vec::Zero(1), Vec::Zero(1), 1.0, 0.1, hold);
  // x' = -x + t from 0: x(1) = e^{-1}.
  EXPECT_NEAR(a.x(10, 0), std::exp(-1.0), 1e-6);
  EXPECT_GT(std::abs(b.x(10, 0) - a.x(10, 0)), 1e-3);
}

TEST(SimKit, MetricExamples) {
  const double dt = 1e-3;
  const Mat yh = column(5001, dt, [](double t) { return std::sin(t) + 0.3; });
  EXPECT_DOUBLE_EQ(empirical_rise(yh, yh, dt), 0.0);
  EXPECT_DOUBLE_EQ(empirical_sse(yh, yh, dt), 0.0);
  EXPECT_NEAR(empirical_rise(2 * yh, yh, dt), 1.0 / std::sqrt(5.0), 1e-12);
  const double c = 0.2;
  const Mat y = yh.array() + c;
  const double denom = std::sqrt(std::pow(signal_norms(y, dt).l2, 2) + std::pow(signal_norms(yh, dt).l2, 2));
  EXPECT_NEAR(empirical_sse(y, yh, dt), c / denom, 1e-12);
  EXPECT_KC_ERROR(empirical_rise(Mat::Zero(10, 1), Mat::Zero(10, 1), dt), ErrorCode::ZeroDenominator);
  EXPECT_KC_ERROR(empirical_sse(Mat::Zero(10, 1), Mat::Zero(10, 1), dt), ErrorCode::ZeroDenominator);
  EXPECT_KC_ERROR(empirical_rise(Mat::Zero(10, 1), Mat::Zero(11, 1), dt), ErrorCode::GridMismatch);
}

TEST(SimKit, TimeShiftInvariance) {
  const double dt = 1e-3;
  const Mat y = column(3001, dt, [](double t) { return std::sin(2 * t); });
  const Mat yh = column(3001, dt, [](double t) { return 0.9 * std::sin(2 * t + 0.05 * t * t); });
  Mat yp = Mat::Zero(4001, 1), yhp = Mat::Zero(4001, 1);
  yp.bottomRows(3001) = y;
  yhp.bottomRows(3001) = yh;
  EXPECT_NEAR(empirical_rise(yp, yhp, dt), empirical_rise(y, yh, dt), 1e-14);
  EXPECT_NEAR(empirical_sse(yp, yhp, dt), empirical_sse(y, yh, dt), 1e-14);
}

TEST(SimKit, RunningMetricsEndAtFullValue) {
  const double dt = 1e-2;
  const Mat y = column(501, dt, [](double t) { return std::cos(t); });
  const Mat yh = column(501, dt, [](double t) { return std::cos(1.1 * t); });
  const auto rm = running_metrics(y, yh, dt);
  EXPECT_NEAR(rm.rise[500], empirical_rise(y, yh, dt), 1e-12);
  EXPECT_NEAR(rm.sse[500], empirical_sse(y, yh, dt), 1e-12);
  EXPECT_DOUBLE_EQ(running_metrics(Mat::Zero(3, 1), Mat::Zero(3, 1), dt).rise[2], 0.0);
}

TEST(SimKit, RatioHelpers) {
  const double dt = 1e-3;
  const Mat eta = column(1001, dt, [](double) { return 2.0; });
  const Mat z = column(1001, dt, [](double) { return 1.0; });
  EXPECT_NEAR(energy_ratio(z, eta, dt), 0.5, 1e-12);
  EXPECT_NEAR(peak_ratio(z, eta, dt), 0.5, 1e-12);
  EXPECT_KC_ERROR(peak_ratio(z, Mat::Zero(1001, 1), dt), ErrorCode::ZeroDenominator);
}

TEST(SimKit, CsvFormat) {
  Trajectory tr;
  tr.dt = 0.5;
  tr.t = (Vec(2) << 0.0, 0.5).finished();
  tr.y = (Mat(2, 1) << 1.0 / 3.0, 2.0).finished();
  tr.yhat = (Mat(2, 1) << 1.0, 2.0).finished();
  tr.u = (Mat(2, 2) << 1, 2, 3, 4).finished();
  tr.uhat = tr.u;
  tr.x = tr.xhat = Mat::Zero(2, 1);
  std::ostringstream os;
  write_csv(os, tr);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,y_1,yhat_1,u_1,u_2,uhat_1,uhat_2,rise_running,sse_running");
  EXPECT_EQ(row.substr(0, 14), "0,0.333333333,");
}

TEST(SimKit, ArmRiseConvergesUnderRefinement) {
  const Scenario sc = load_scenario("arm");
  const auto ref = arm_case_a();
  auto rise_at = [&](double dt) {
    const auto tr = simulate_closed_loop(arm_plant_loop(sc.net, ref.r), arm_reference_loop(ref.r), Vec::Zero(2),
                                         Vec::Zero(2), sc.arm.T, dt);
    return empirical_rise(tr.y, tr.yhat, dt);
  };
  EXPECT_LT(std::abs(rise_at(1e-3) - rise_at(5e-4)), 1e-3);
}
