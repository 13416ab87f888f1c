#include <benchmark/benchmark.h>

#include <cstdlib>

#include "keepclose/certify.hpp"
#include "keepclose/scenarios.hpp"

using namespace keepclose;

namespace {

const Scenario& arm() {
  static const Scenario s = [] {
    setenv("KEEPCLOSE_FIXTURE_DIR", KEEPCLOSE_BENCH_FIXTURE_DIR, 0);
    return load_scenario("arm");
  }();
  return s;
}

const Channel& arm_channel() {
  static const Channel c = make_channels(arm()).front();
  return c;
}

void BM_ArmRiseSolve(benchmark::State& state) {
  const Channel& ch = arm_channel();
  for (auto _ : state) {
    const CertProblem cp = rise_lmi(ch.vertices, ch.xi.M, {static_cast<int>(ch.xi.M.rows())}, 0.7);
    benchmark::DoNotOptimize(is_feasible(cp.problem));
  }
}
BENCHMARK(BM_ArmRiseSolve);

void BM_ArmCertifyRise(benchmark::State& state) {
  const Channel& ch = arm_channel();
  for (auto _ : state) benchmark::DoNotOptimize(certify_rise(ch.vertices, ch.xi));
}
BENCHMARK(BM_ArmCertifyRise)->Unit(benchmark::kMillisecond);

void BM_JacobianBox(benchmark::State& state) {
  const MlpController& net = arm().net;
  const Vec lo = Vec::Constant(1, -arm().arm.theta_max), hi = -lo;
  const int splits = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(jacobian_box(net, lo, hi, splits));
}
BENCHMARK(BM_JacobianBox)->Arg(1)->Arg(16)->Arg(64);

void BM_ArmCaseA(benchmark::State& state) {
  const auto ref = arm_case_a();
  for (auto _ : state) {
    const auto tr = simulate_closed_loop(arm_plant_loop(arm().net, ref.r), arm_reference_loop(ref.r), Vec::Zero(2),
                                         Vec::Zero(2), 20.0, 1e-3);
    benchmark::DoNotOptimize(empirical_rise(tr.y, tr.yhat, tr.dt));
  }
}
BENCHMARK(BM_ArmCaseA)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
