// Acceptance suite: one PASS/FAIL line per criterion. Exits 0 once every
// criterion has been evaluated; the verdicts themselves live in the output
// and in acceptance_report.txt.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "keepclose/certify.hpp"
#include "keepclose/scenarios.hpp"

namespace fs = std::filesystem;
using namespace keepclose;

namespace {

// Tolerances.
constexpr double kNumSlack = 1e-6;           // empirical <= certified + slack
constexpr double kGammaWindowHi = 0.12;      // criterion 2 upper edge
constexpr double kEmpiricalPeakA = 0.045;    // criterion 2 lower edges
constexpr double kEmpiricalPeakB = 0.051;
constexpr double kTubeFactorReference = 0.1202;
constexpr double kTubeRounding = 5e-5;       // four-decimal rounding
constexpr double kTubeMargin = 0.01;         // criterion 3 relative margin
constexpr double kDissipationRel = 1e-3;     // criterion 4
constexpr double kFactorWindow = 3.0;        // criterion 5
constexpr double kJacobianRel = 1e-6;        // criterion 6
constexpr double kIqcFloor = -1e-9;          // criterion 7
constexpr double kLmiBand = 1e-3;            // criterion 8 excluded band
constexpr double kGuidanceRel = 1e-12;       // criterion 9
constexpr double kArmBudget = 120.0;         // seconds
constexpr double kApolloBudget = 600.0;

struct Verdict {
  int id;
  std::string title;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void record(int id, const std::string& title, bool pass, const std::string& detail) {
  verdicts.push_back({id, title, pass, detail});
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << title << "): " << detail << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct ArmState {
  Scenario sc;
  std::vector<Channel> channels;
  Certificate rise, sse;
  std::vector<Run> runs;
};

ArmState& arm() {
  static ArmState s;
  return s;
}

// ---------------------------------------------------------------- 1

void criterion_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  ArmState& a = arm();
  a.sc = load_scenario("arm");
  a.channels = make_channels(a.sc);
  const Channel& ch = a.channels.front();
  a.rise = certify_rise(ch.vertices, ch.xi);
  a.sse = certify_sse(ch.vertices, ch.xi, SseMode::Bisect);
  RunOptions ro;
  ro.random_count = 50;
  a.runs = bundled_runs(a.sc, ro);

  int violations = 0, domain = 0;
  double rise_margin = 1e300, sse_margin = 1e300;
  for (const Run& run : a.runs) {
    const double r = empirical_rise(run.traj.y, run.traj.yhat, run.traj.dt);
    const double s = empirical_sse(run.traj.y, run.traj.yhat, run.traj.dt);
    violations += (r > a.rise.level + kNumSlack) + (s > a.sse.level + kNumSlack);
    rise_margin = std::min(rise_margin, a.rise.level - r);
    sse_margin = std::min(sse_margin, a.sse.level - s);
    if (run.traj.y.cwiseAbs().maxCoeff() > a.sc.arm.theta_max) ++domain;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = violations == 0 && domain == 0 && a.runs.size() == 52 && elapsed < kArmBudget;
  record(1, "arm soundness", pass,
         std::to_string(a.runs.size()) + " runs, gamma*=" + num(a.rise.level) + " sigma*=" + num(a.sse.level) +
             ", violations=" + std::to_string(violations) + ", angle-domain exits=" + std::to_string(domain) +
             ", min RISE margin=" + num(rise_margin) + ", min SSE margin=" + num(sse_margin) + ", " +
             num(elapsed, 3) + " s");
}

// ---------------------------------------------------------------- 2

void criterion_reference_window() {
  const ArmState& a = arm();
  const double g = a.rise.level;
  const double f = tube_factor(0.05669);
  const bool finite = std::isfinite(g);
  const bool upper = g <= kGammaWindowHi;
  const bool lower = g >= kEmpiricalPeakA && g >= kEmpiricalPeakB;
  const bool tube = std::abs(f - kTubeFactorReference) <= kTubeRounding;
  record(2, "arm reference-number window", finite && upper && lower && tube,
         "gamma*=" + num(g) + (upper ? " <= " : " > ") + num(kGammaWindowHi) + ", >= 0.045/0.051: " +
             (lower ? "yes" : "no") + ", tube_factor(0.05669)=" + num(f, 8) + " (reference 0.1202)");
}

// ---------------------------------------------------------------- 3

void criterion_tube() {
  const ArmState& a = arm();
  const double g = a.rise.level;
  if (!(g < 1.0)) {
    record(3, "tube containment", false, "gamma*=" + num(g) + " >= 1, tube bound undefined");
    return;
  }
  bool pass = true;
  std::string detail;
  for (const Run& run : a.runs) {
    if (run.name != "case_a" && run.name != "case_b") continue;
    const double lhs = signal_norms(run.traj.y - run.traj.yhat, run.traj.dt).l2;
    const double rhs = tube_factor(g) * signal_norms(run.traj.yhat, run.traj.dt).l2;
    const bool ok = lhs <= (1.0 - kTubeMargin) * rhs;
    pass = pass && ok;
    detail += run.name + ": " + num(lhs) + " vs " + num(rhs) + " (slack " + num(100.0 * (1.0 - lhs / rhs), 4) +
              "%); ";
  }
  record(3, "tube containment", pass, detail);
}

// ---------------------------------------------------------------- 4

void criterion_dissipation() {
  const ArmState& a = arm();
  const Channel& ch = a.channels.front();
  const StateSpace plant = arm_plant_model();
  const ErrorSystem err = build_error_system(plant, arm_reference_model());
  const Mat WM = lambda_weighted(ch.xi.M, a.rise.lambda_blocks, a.rise.lambda);
  const double lam_lo = ch.lambda_box.lo(0, 0), lam_hi = ch.lambda_box.hi(0, 0);
  const MlpController net = a.sc.net;
  std::mt19937_64 rng(404);
  double worst_ratio = -1e300;
  bool pass = true;
  for (int k = 0; k < 10; ++k) {
    double amp[3][2], w[3][2], ph[3][2];
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 2; ++c) {
        amp[i][c] = uniform(rng, 0.0, 0.5);
        w[i][c] = uniform(rng, 0.1, 3.0);
        ph[i][c] = uniform(rng, 0.0, 6.283);
      }
    const double lw = uniform(rng, 0.2, 2.0), lph = uniform(rng, 0.0, 6.283);
    auto eta = [=](double t) {
      Vec e = Vec::Zero(2);
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 2; ++c) e[c] += amp[i][c] * std::sin(w[i][c] * t + ph[i][c]);
      return e;
    };
    auto sys = [&, lw, lph](double t) {
      const double s = 0.5 * (1.0 + std::sin(lw * t + lph));
      const Mat L = Mat::Constant(1, 1, lam_lo + s * (lam_hi - lam_lo));
      return build_extended(err, controller_error_gain(L, plant), ch.xi);
    };
    auto q = [&net](const Vec& e, double) {
      Vec out(2);
      out[0] = arm_delta(e[0]);
      out[1] = forward(net, Vec::Constant(1, e[1]))[0];
      return out;
    };
    const ExtendedTrajectory tr = simulate_extended(sys, eta, q, 20.0, 1e-3);
    const double res = check_dissipation(tr, a.rise.P, WM, a.rise.level);
    const double scale = tr.eta.rowwise().squaredNorm().maxCoeff();
    worst_ratio = std::max(worst_ratio, res / scale);
    pass = pass && res <= kDissipationRel * scale;
  }
  record(4, "dissipation residual", pass,
         "10 trajectories, worst residual / max(eta'eta) = " + num(worst_ratio) + " (limit " +
             num(kDissipationRel) + ")");
}

// ---------------------------------------------------------------- 5

void criterion_apollo() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario("apollo");
  const auto channels = make_channels(sc);
  const auto runs = bundled_runs(sc);
  const Run* landing = nullptr;
  for (const Run& r : runs)
    if (r.name == "landing") landing = &r;
  // Reference factors, positions then velocities along x, y, z.
  const std::vector<std::pair<std::string, double>> reference = {
      {"x_position", 0.0988}, {"y_position", 0.1992}, {"z_position", 0.1581},
      {"x_velocity", 0.0119}, {"y_velocity", 0.0244}, {"z_velocity", 0.0158}};
  bool finite = true, sound = landing != nullptr, window = true;
  std::string detail;
  for (const auto& [name, expected] : reference) {
    const auto it = std::find_if(channels.begin(), channels.end(), [&](const Channel& c) { return c.name == name; });
    if (it == channels.end()) {
      finite = false;
      detail += name + ": missing; ";
      continue;
    }
    CertifyOptions o;
    o.hi = 1000.0;
    double g = std::numeric_limits<double>::infinity();
    try {
      g = certify_rise(it->vertices, it->xi, o).level;
    } catch (const Error&) {
      finite = false;
    }
    double emp = std::nan("");
    if (landing) {
      emp = energy_ratio(it->z_of(landing->traj), it->eta_of(landing->traj), landing->traj.dt);
      sound = sound && emp <= g + kNumSlack;
    }
    std::string factor = "undefined";
    bool in_window = false;
    if (g < 1.0) {
      const double f = tube_factor(g);
      factor = num(f, 4);
      in_window = f <= kFactorWindow * expected && f >= expected / kFactorWindow;
    }
    window = window && in_window;
    detail += name + ": gamma=" + num(g, 5) + " emp=" + num(emp, 4) + " factor=" + factor + " (reference " +
              num(expected, 4) + "); ";
  }
  const double elapsed = seconds_since(t0);
  record(5, "apollo soundness", finite && sound && window && elapsed < kApolloBudget,
         detail + "finite=" + (finite ? "yes" : "no") + " sound=" + (sound ? "yes" : "no") +
             " factor window=" + (window ? "yes" : "no") + ", " + num(elapsed, 3) + " s");
}

// ---------------------------------------------------------------- 6

MlpController random_net(std::mt19937_64& rng, int in, int out) {
  std::vector<Layer> layers;
  int prev = in;
  const int depth = 1 + static_cast<int>(rng() % 2);
  for (int d = 0; d < depth; ++d) {
    const int width = 2 + static_cast<int>(rng() % 5);
    Layer l;
    l.W = Mat::NullaryExpr(width, prev, [&] { return uniform(rng, -2, 2); });
    l.b = Vec::NullaryExpr(width, [&] { return uniform(rng, -1, 1); });
    l.act = (rng() % 2) ? Activation::Tanh : Activation::Sigmoid;
    layers.push_back(l);
    prev = width;
  }
  Layer o;
  o.W = Mat::NullaryExpr(out, prev, [&] { return uniform(rng, -2, 2); });
  o.b = Vec::NullaryExpr(out, [&] { return uniform(rng, -1, 1); });
  layers.push_back(o);
  return MlpController(layers);
}

void criterion_dmv() {
  std::mt19937_64 rng(606);
  int quotient_fail = 0, sample_fail = 0, fd_fail = 0;
  double worst_fd = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int in = 1 + static_cast<int>(rng() % 3), out = 1 + static_cast<int>(rng() % 2);
    const MlpController net = random_net(rng, in, out);
    const Vec y1 = Vec::NullaryExpr(in, [&] { return uniform(rng, -2, 2); });
    const Vec y2 = Vec::NullaryExpr(in, [&] { return uniform(rng, -2, 2); });
    const IntervalMatrix iv = jacobian_box(net, y1.cwiseMin(y2), y1.cwiseMax(y2));
    const Vec d = y1 - y2, diff = forward(net, y1) - forward(net, y2);
    for (int i = 0; i < out; ++i) {
      double lo = 0.0, hi = 0.0;
      for (int j = 0; j < in; ++j) {
        const double a = iv.lo(i, j) * d[j], b = iv.hi(i, j) * d[j];
        lo += std::min(a, b);
        hi += std::max(a, b);
      }
      const double slack = 1e-12 * (1.0 + std::abs(diff[i]));
      if (diff[i] < lo - slack || diff[i] > hi + slack) ++quotient_fail;
    }
    for (int s = 0; s <= 20; ++s) {
      const Vec y = y2 + (s / 20.0) * d;
      const Mat J = jacobian(net, y);
      if (!iv.contains(J, 1e-12)) ++sample_fail;
      if (s % 5 == 0) {
        const double h = 1e-6;
        for (int j = 0; j < in; ++j) {
          Vec a = y, b = y;
          a[j] += h;
          b[j] -= h;
          const Vec fd = (forward(net, a) - forward(net, b)) / (2 * h);
          for (int i = 0; i < out; ++i) {
            const double rel = std::abs(fd[i] - J(i, j)) / std::max(1.0, std::abs(J(i, j)));
            worst_fd = std::max(worst_fd, rel);
            if (rel > kJacobianRel) ++fd_fail;
          }
        }
      }
    }
  }
  record(6, "DMV property", quotient_fail == 0 && sample_fail == 0 && fd_fail == 0,
         "1000 nets: quotient escapes=" + std::to_string(quotient_fail) +
             ", sampled Jacobian escapes=" + std::to_string(sample_fail) +
             ", finite-difference mismatches=" + std::to_string(fd_fail) + " (worst rel " + num(worst_fd, 3) + ")");
}

// ---------------------------------------------------------------- 7

double worst_iqc(const std::vector<Channel>& channels, const Run& run, int only_factor = -1) {
  double worst = 1e300;
  std::vector<std::string> seen;
  for (const Channel& ch : channels) {
    if (std::find(seen.begin(), seen.end(), ch.iqc_group) != seen.end()) continue;
    seen.push_back(ch.iqc_group);
    const auto [P, Q] = ch.iqc_signals(run);
    int pc = 0, qc = 0;
    for (std::size_t f = 0; f < ch.classes.size(); ++f) {
      const IqcFactor fac = ch.classes[f].factor();
      const Mat p = P.middleCols(pc, fac.p_dim()), q = Q.middleCols(qc, fac.q_dim());
      pc += fac.p_dim();
      qc += fac.q_dim();
      if (only_factor >= 0 && static_cast<int>(f) != only_factor) continue;
      const auto prefix = hard_iqc_prefix(fac, p, q, run.traj.dt);
      worst = std::min(worst, *std::min_element(prefix.begin(), prefix.end()));
    }
  }
  return worst;
}

void criterion_iqc() {
  const ArmState& a = arm();
  double worst_arm = 1e300, worst_apollo = 1e300;
  for (const Run& run : a.runs) worst_arm = std::min(worst_arm, worst_iqc(a.channels, run));
  const Scenario ap = load_scenario("apollo");
  const auto ap_channels = make_channels(ap);
  const auto ap_runs = bundled_runs(ap);
  for (const Run& run : ap_runs) worst_apollo = std::min(worst_apollo, worst_iqc(ap_channels, run));

  RunOptions bad;
  bad.random_count = 0;
  bad.delta_gain = 3.0;
  const auto bad_runs = bundled_runs(a.sc, bad);
  int flagged = 0;
  for (const Run& run : bad_runs) flagged += worst_iqc(a.channels, run, 0) < kIqcFloor;

  const bool pass = worst_arm >= kIqcFloor && worst_apollo >= kIqcFloor && flagged > 0;
  record(7, "hard IQC positivity", pass,
         "arm " + std::to_string(a.runs.size()) + " runs worst prefix=" + num(worst_arm) + ", apollo " +
             std::to_string(ap_runs.size()) + " runs worst prefix=" + num(worst_apollo) +
             ", out-of-class (delta x3) runs flagged=" + std::to_string(flagged) + "/" +
             std::to_string(bad_runs.size()));
}

// ---------------------------------------------------------------- 8

Mat random_symmetric3(std::mt19937_64& rng) {
  Mat R = Mat::NullaryExpr(3, 3, [&] { return uniform(rng, -1, 1); });
  return 0.5 * (R + R.transpose());
}

void criterion_lmi_oracle() {
  std::mt19937_64 rng(808);
  int compared = 0, excluded = 0, mismatched = 0, unknown = 0;
  for (int k = 0; k < 200; ++k) {
    const Mat F0 = random_symmetric3(rng) + uniform(rng, -1.5, 2.0) * Mat::Identity(3, 3);
    const Mat F1 = random_symmetric3(rng), F2 = random_symmetric3(rng);
    LmiProblem prob;
    const int a = prob.add_scalar("a"), b = prob.add_scalar("b");
    AffineExpr e(3);
    e.add_constant(F0).add_term(a, F1).add_term(b, F2);
    prob.add_constraint("F", e, Sense::NegativeDefinite);
    for (int v : {a, b}) {
      AffineExpr up(1), down(1);
      up.add_constant(-Mat::Ones(1, 1)).add_term(v, Mat::Ones(1, 1));
      down.add_constant(-Mat::Ones(1, 1)).add_term(v, -Mat::Ones(1, 1));
      prob.add_constraint("x_le_1", up, Sense::NegativeDefinite);
      prob.add_constraint("x_ge_-1", down, Sense::NegativeDefinite);
    }
    // Brute-force oracle: coarse grid over the box, then repeated zoom
    // around the best point (the margin is convex in (a, b)).
    double ca = 0.0, cb = 0.0, half = 1.0, best = 1e300;
    for (int level = 0; level < 12; ++level) {
      double ba = ca, bb = cb;
      for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
          Vec x(2);
          x << std::clamp(ca - half + half * i / 10.0, -1.0, 1.0), std::clamp(cb - half + half * j / 10.0, -1.0, 1.0);
          const double m = worst_margin(prob, x);
          if (m < best) {
            best = m;
            ba = x[0];
            bb = x[1];
          }
        }
      ca = ba;
      cb = bb;
      half *= 0.3;
    }
    if (std::abs(best) <= kLmiBand) {
      ++excluded;
      continue;
    }
    ++compared;
    const SolveResult res = is_feasible(prob);
    if (res.status == SolveStatus::SolverUnknown) ++unknown;
    if ((res.status == SolveStatus::Feasible) != (best < 0.0)) ++mismatched;
  }
  record(8, "LMI oracle equivalence", mismatched == 0 && compared > 0,
         std::to_string(compared) + " compared, " + std::to_string(excluded) + " in the +/-1e-3 band, " +
             std::to_string(mismatched) + " mismatched, " + std::to_string(unknown) + " solver-unknown");
}

// ---------------------------------------------------------------- 9

void criterion_guidance() {
  std::mt19937_64 rng(909);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    GuidanceState s;
    GuidanceTarget tg;
    for (int i = 0; i < 3; ++i) {
      s.r[i] = uniform(rng, -7000, 7000);
      s.v[i] = uniform(rng, -250, 250);
      tg.r[i] = uniform(rng, -100, 100);
      tg.v[i] = uniform(rng, -5, 5);
      tg.a[i] = uniform(rng, -4, 4);
    }
    const double T = uniform(rng, 1.0, 300.0);
    const GuidanceCoefficients c = apollo_coefficients(s, tg, T);
    Eigen::Matrix3d A;
    A << 1, T, T * T, T, T * T / 2, T * T * T / 3, T * T / 2, T * T * T / 6, T * T * T * T / 12;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3d x(c.C0[i], c.C1[i], c.C2[i]);
      const Eigen::Vector3d rhs(tg.a[i], tg.v[i] - s.v[i], tg.r[i] - s.r[i] - s.v[i] * T);
      const Eigen::Vector3d res = A * x - rhs;
      for (int row = 0; row < 3; ++row) {
        double scale = std::abs(rhs[row]);
        for (int j = 0; j < 3; ++j) scale += std::abs(A(row, j) * x[j]);
        scale +=
            (row == 2 ? std::abs(s.r[i]) + std::abs(tg.r[i]) + std::abs(s.v[i] * T) : 0.0);
        worst = std::max(worst, std::abs(res[row]) / scale);
      }
    }
  }
  GuidanceState s;
  s.v.z() = 1.0;
  GuidanceTarget tg;
  tg.r.z() = 3.0;
  const double t_go = apollo_tgo(s, tg);
  record(9, "guidance algebra", worst <= kGuidanceRel && t_go == 9.0,
         "1e4 states, worst relative residual=" + num(worst, 3) + ", t_go(3,1)=" + num(t_go, 17));
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

int cli_call(std::vector<std::string> args) {
  args.insert(args.begin(), "keepclose");
  std::vector<char*> argv;
  for (auto& s : args) argv.push_back(s.data());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "keepclose_acceptance_determinism";
  fs::remove_all(root);
  int rc = 0;
  for (const char* tag : {"a", "b"})
    for (const char* scenario : {"arm", "apollo"}) {
      const std::string dir = (root / tag / scenario).string();
      rc |= cli_call({"simulate", "--scenario", scenario, "--seed", "1", "--out", dir});
      rc |= cli_call({"certify", "--scenario", scenario, "--out", dir});
    }
  int files = 0, differ = 0;
  for (const char* scenario : {"arm", "apollo"})
    for (const auto& e : fs::directory_iterator(root / "a" / scenario)) {
      ++files;
      differ += slurp(e.path()) != slurp(root / "b" / scenario / e.path().filename());
    }
  fs::remove_all(root);
  record(10, "determinism", rc == 0 && files > 0 && differ == 0,
         std::to_string(files) + " CSV/JSON files compared, " + std::to_string(differ) + " differ, exit codes " +
             (rc == 0 ? "ok" : "nonzero"));
}

}  // namespace

int main(int argc, char** argv) {
  std::string report_path = "acceptance_report.txt";
  if (argc > 1) report_path = argv[1];
  const std::vector<std::function<void()>> criteria = {
      criterion_soundness, criterion_reference_window, criterion_tube,     criterion_dissipation,
      criterion_apollo,    criterion_dmv,          criterion_iqc,      criterion_lmi_oracle,
      criterion_guidance,  criterion_determinism};
  int evaluated = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
      ++evaluated;
    } catch (const std::exception& e) {
      record(static_cast<int>(i + 1), "evaluation error", false, e.what());
    }
  }
  std::ofstream report(report_path);
  int passed = 0;
  for (const Verdict& v : verdicts) {
    report << (v.pass ? "PASS" : "FAIL") << "  criterion " << v.id << " (" << v.title << "): " << v.detail << "\n";
    passed += v.pass;
  }
  std::cout << passed << "/" << verdicts.size() << " criteria passed; report written to " << report_path
            << std::endl;
  return evaluated == static_cast<int>(criteria.size()) ? 0 : 1;
}
