#include "keepclose/certify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "keepclose/errors.hpp"

namespace keepclose {

const char* to_string(Metric m) { return m == Metric::Rise ? "RISE" : "SSE"; }

std::vector<int> lambda_blocks(const IqcFactor& xi, LambdaMode mode) {
  if (mode == LambdaMode::PerFactor && !xi.blocks.empty()) return xi.blocks;
  return {xi.r_dim()};
}

Mat lambda_weighted(const Mat& M, const std::vector<int>& blocks, const Vec& lambda) {
  if (static_cast<Eigen::Index>(blocks.size()) != lambda.size())
    raise(ErrorCode::DimensionMismatch, "one multiplier per block required");
  Mat out = Mat::Zero(M.rows(), M.cols());
  int at = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    out.block(at, at, blocks[k], blocks[k]) = lambda[static_cast<Eigen::Index>(k)] * M.block(at, at, blocks[k], blocks[k]);
    at += blocks[k];
  }
  if (at != M.rows()) raise(ErrorCode::DimensionMismatch, "multiplier blocks do not cover M");
  return out;
}

namespace {

void check_vertices(const std::vector<ExtendedSystem>& vertices, const Mat& M) {
  if (vertices.empty()) raise(ErrorCode::EmptyList, "certification needs at least one vertex");
  const auto& v0 = vertices.front();
  for (const auto& v : vertices)
    if (v.states() != v0.states() || v.q_dim() != v0.q_dim() || v.eta_dim() != v0.eta_dim() ||
        v.r_dim() != v0.r_dim() || v.z_dim() != v0.z_dim())
      raise(ErrorCode::DimensionMismatch, "vertices have different extended dimensions");
  if (M.rows() != v0.r_dim() || M.cols() != v0.r_dim())
    raise(ErrorCode::DimensionMismatch, "M does not match the IQC output dimension");
}

CertLayout declare(LmiProblem& prob, int n, const std::vector<int>& blocks) {
  CertLayout lay;
  lay.P = prob.add_symmetric("P", n);
  for (std::size_t k = 0; k < blocks.size(); ++k) lay.lambda.push_back(prob.add_scalar("lambda" + std::to_string(k)));
  return lay;
}

// Block of the first LMI shared by both theorems, without the 1/gamma^2 term.
AffineExpr storage_block(const ExtendedSystem& e, const Mat& M, const std::vector<int>& blocks,
                         const CertLayout& lay) {
  const int n = e.states(), nq = e.q_dim(), ne = e.eta_dim(), N = n + nq + ne;
  AffineExpr expr(N);
  Mat E = Mat::Zero(n, N);
  E.leftCols(n).setIdentity();
  Mat K(n, N);
  K << e.Acal, e.B1, e.B2;
  expr.add_congruence(lay.P, E.transpose(), K);
  Mat F0 = Mat::Zero(N, N);
  F0.bottomRightCorner(ne, ne) = -Mat::Identity(ne, ne);
  expr.add_constant(F0);
  Mat W(e.r_dim(), N);
  W << e.C1, e.D11, e.D12;
  int at = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Mat Wk = W.middleRows(at, blocks[k]);
    expr.add_term(lay.lambda[k], Wk.transpose() * M.block(at, at, blocks[k], blocks[k]) * Wk);
    at += blocks[k];
  }
  return expr;
}

void add_side_constraints(LmiProblem& prob, const CertLayout& lay) {
  AffineExpr p(lay.P.n);
  for (int k = 0; k < lay.P.count(); ++k) p.add_term(lay.P.offset + k, lay.P.basis(k));
  prob.add_constraint("P_pos", std::move(p), Sense::PositiveDefinite);
  for (std::size_t k = 0; k < lay.lambda.size(); ++k) {
    AffineExpr l(1);
    l.add_term(lay.lambda[k], Mat::Identity(1, 1));
    prob.add_constraint("lambda" + std::to_string(k) + "_pos", std::move(l), Sense::PositiveDefinite);
  }
}

struct Probe {
  bool feasible = false;
  Vec x;
  double margin = 0.0;
  CertLayout layout;
  std::vector<int> blocks;
};

template <class Build>
Probe probe(const Build& build, const IqcFactor& xi, const CertifyOptions& opt, double level) {
  std::vector<LambdaMode> modes;
  if (opt.lambda_mode == LambdaMode::Auto) {
    modes = {LambdaMode::Single};
    if (xi.blocks.size() > 1) modes.push_back(LambdaMode::PerFactor);
  } else {
    modes = {opt.lambda_mode};
  }
  Probe last;
  for (LambdaMode mode : modes) {
    const auto blocks = lambda_blocks(xi, mode);
    CertProblem cp = build(blocks, level);
    const SolveResult res = is_feasible(cp.problem, opt.solver);
    last.feasible = res.status == SolveStatus::Feasible;
    last.x = res.witness.x;
    last.margin = res.witness.margin;
    last.layout = cp.layout;
    last.blocks = blocks;
    if (last.feasible) break;
  }
  return last;
}

Certificate finish(Metric metric, double level, const Probe& p, int vertices, std::vector<BisectionStep> trace) {
  Certificate c;
  c.metric = metric;
  c.level = level;
  c.P = p.layout.P.value(p.x);
  c.lambda.resize(static_cast<Eigen::Index>(p.layout.lambda.size()));
  for (std::size_t k = 0; k < p.layout.lambda.size(); ++k) c.lambda[static_cast<Eigen::Index>(k)] = p.x[p.layout.lambda[k]];
  c.lambda_blocks = p.blocks;
  c.margin = p.margin;
  c.vertices = vertices;
  c.trace = std::move(trace);
  Eigen::SelfAdjointEigenSolver<Mat> es(c.P, Eigen::EigenvaluesOnly);
  c.witness_eigs = es.eigenvalues();
  return c;
}

template <class Build>
Certificate bisect(Metric metric, const Build& build, const IqcFactor& xi, int nverts, const CertifyOptions& opt) {
  if (!(opt.lo > 0.0) || !(opt.hi >= opt.lo))
    raise(metric == Metric::Rise ? ErrorCode::NonPositiveGamma : ErrorCode::NonPositiveSigma,
          "search range must satisfy 0 < lo <= hi");
  std::vector<BisectionStep> trace;
  Probe top = probe(build, xi, opt, opt.hi);
  trace.push_back({opt.hi, top.feasible});
  if (!top.feasible)
    raise(ErrorCode::InfeasibleAtUpper, std::string("no ") + to_string(metric) + " certificate at level " +
                                            std::to_string(opt.hi));
  Probe bottom = probe(build, xi, opt, opt.lo);
  trace.push_back({opt.lo, bottom.feasible});
  if (bottom.feasible) return finish(metric, opt.lo, bottom, nverts, std::move(trace));
  double lo = opt.lo, hi = opt.hi;
  Probe best = top;
  for (int it = 0; it < opt.max_iter && hi / lo - 1.0 > opt.tol_bisect; ++it) {
    const double mid = std::sqrt(lo * hi);
    Probe p = probe(build, xi, opt, mid);
    trace.push_back({mid, p.feasible});
    if (p.feasible) {
      hi = mid;
      best = std::move(p);
    } else {
      lo = mid;
    }
  }
  return finish(metric, hi, best, nverts, std::move(trace));
}

}  // namespace

CertProblem rise_lmi(const std::vector<ExtendedSystem>& vertices, const Mat& M, const std::vector<int>& blocks,
                     double gamma) {
  if (!(gamma > 0.0)) raise(ErrorCode::NonPositiveGamma, "gamma must be positive");
  check_vertices(vertices, M);
  CertProblem cp;
  cp.layout = declare(cp.problem, vertices.front().states(), blocks);
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const auto& e = vertices[v];
    AffineExpr expr = storage_block(e, M, blocks, cp.layout);
    Mat V(e.z_dim(), expr.dim());
    V << e.C2, e.D21, e.D22;
    expr.add_constant(V.transpose() * V / (gamma * gamma));
    cp.problem.add_constraint("rise_v" + std::to_string(v), std::move(expr), Sense::NegativeDefinite);
  }
  add_side_constraints(cp.problem, cp.layout);
  return cp;
}

CertProblem rise_lmi(const ExtendedSystem& ext, const Mat& M, double gamma) {
  return rise_lmi(std::vector<ExtendedSystem>{ext}, M, {static_cast<int>(M.rows())}, gamma);
}

CertProblem sse_lmis(const std::vector<ExtendedSystem>& vertices, const Mat& M, const std::vector<int>& blocks,
                     double sigma) {
  check_vertices(vertices, M);
  const bool variable = !(sigma > 0.0);
  if (!variable && !std::isfinite(sigma)) raise(ErrorCode::NonPositiveSigma, "sigma must be finite");
  if (std::isnan(sigma)) raise(ErrorCode::NonPositiveSigma, "sigma must be positive");
  CertProblem cp;
  cp.layout = declare(cp.problem, vertices.front().states(), blocks);
  if (variable) {
    cp.layout.sigma2 = cp.problem.add_scalar("sigma2");
    cp.problem.set_objective(cp.layout.sigma2, 1.0);
  }
  std::vector<Mat> seen;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const auto& e = vertices[v];
    if (!e.D21.isZero(0.0) || !e.D22.isZero(0.0))
      raise(ErrorCode::UnsupportedStructure, "SSE certificate needs zero feedthrough from (q, eta) to z");
    cp.problem.add_constraint("sse_storage_v" + std::to_string(v), storage_block(e, M, blocks, cp.layout),
                              Sense::NegativeDefinite);
    if (std::any_of(seen.begin(), seen.end(), [&](const Mat& c) { return c == e.C2; })) continue;
    seen.push_back(e.C2);
    const int n = e.states(), k = e.z_dim();
    AffineExpr s(n + k);
    Mat top = Mat::Zero(n, n + k);
    top.leftCols(n).setIdentity();
    s.add_sandwich(cp.layout.P, top);
    Mat F0 = Mat::Zero(n + k, n + k);
    F0.bottomLeftCorner(k, n) = e.C2;
    F0.topRightCorner(n, k) = e.C2.transpose();
    Mat I = Mat::Zero(n + k, n + k);
    I.bottomRightCorner(k, k).setIdentity();
    if (variable)
      s.add_term(cp.layout.sigma2, I);
    else
      F0 += sigma * sigma * I;
    s.add_constant(F0);
    cp.problem.add_constraint("sse_output_v" + std::to_string(v), std::move(s), Sense::PositiveDefinite);
  }
  add_side_constraints(cp.problem, cp.layout);
  if (variable) {
    AffineExpr pos(1);
    pos.add_term(cp.layout.sigma2, Mat::Identity(1, 1));
    cp.problem.add_constraint("sigma2_pos", std::move(pos), Sense::PositiveDefinite);
  }
  return cp;
}

CertProblem sse_lmis(const ExtendedSystem& ext, const Mat& M, double sigma) {
  if (!(sigma > 0.0)) raise(ErrorCode::NonPositiveSigma, "sigma must be positive");
  return sse_lmis(std::vector<ExtendedSystem>{ext}, M, {static_cast<int>(M.rows())}, sigma);
}

Certificate certify_rise(const std::vector<ExtendedSystem>& vertices, const IqcFactor& xi,
                         const CertifyOptions& options) {
  check_vertices(vertices, xi.M);
  auto build = [&](const std::vector<int>& blocks, double gamma) { return rise_lmi(vertices, xi.M, blocks, gamma); };
  return bisect(Metric::Rise, build, xi, static_cast<int>(vertices.size()), options);
}

Certificate certify_sse(const std::vector<ExtendedSystem>& vertices, const IqcFactor& xi, SseMode mode,
                        const CertifyOptions& options) {
  check_vertices(vertices, xi.M);
  if (mode == SseMode::Bisect) {
    auto build = [&](const std::vector<int>& blocks, double sigma) { return sse_lmis(vertices, xi.M, blocks, sigma); };
    return bisect(Metric::Sse, build, xi, static_cast<int>(vertices.size()), options);
  }
  if (!(options.lo > 0.0) || !(options.hi >= options.lo))
    raise(ErrorCode::NonPositiveSigma, "search range must satisfy 0 < lo <= hi");
  std::vector<LambdaMode> modes;
  if (options.lambda_mode == LambdaMode::Auto)
    modes = xi.blocks.size() > 1 ? std::vector<LambdaMode>{LambdaMode::PerFactor} : std::vector<LambdaMode>{LambdaMode::Single};
  else
    modes = {options.lambda_mode};
  const auto blocks = lambda_blocks(xi, modes.front());
  CertProblem cp = sse_lmis(vertices, xi.M, blocks, 0.0);
  SolverSettings st = options.solver;
  st.objective_tol = std::min(st.objective_tol, 0.1 * options.tol_bisect);
  const SolveResult res = minimize(cp.problem, st);
  if (res.status != SolveStatus::Feasible)
    raise(ErrorCode::InfeasibleAtUpper, "no SSE certificate exists for the vertex set");
  const double sigma = std::sqrt(std::max(0.0, res.witness.x[cp.layout.sigma2]));
  if (sigma > options.hi) raise(ErrorCode::InfeasibleAtUpper, "optimal SSE level exceeds the search range");
  Probe p;
  p.feasible = true;
  p.x = res.witness.x;
  p.margin = res.witness.margin;
  p.layout = cp.layout;
  p.blocks = blocks;
  return finish(Metric::Sse, std::max(options.lo, sigma), p, static_cast<int>(vertices.size()),
                {{std::max(options.lo, sigma), true}});
}

double verify_certificate(const Certificate& cert, const std::vector<ExtendedSystem>& vertices, const Mat& M) {
  const auto& blocks = cert.lambda_blocks;
  CertProblem cp = cert.metric == Metric::Rise ? rise_lmi(vertices, M, blocks, cert.level)
                                               : sse_lmis(vertices, M, blocks, cert.level);
  if (cert.P.rows() != cp.layout.P.n || cert.lambda.size() != static_cast<Eigen::Index>(cp.layout.lambda.size()))
    raise(ErrorCode::DimensionMismatch, "certificate witness does not match the vertex set");
  Vec x = Vec::Zero(cp.problem.num_vars());
  for (int i = 0; i < cp.layout.P.n; ++i)
    for (int j = i; j < cp.layout.P.n; ++j) x[cp.layout.P.index(i, j)] = cert.P(i, j);
  for (std::size_t k = 0; k < cp.layout.lambda.size(); ++k) x[cp.layout.lambda[k]] = cert.lambda[static_cast<Eigen::Index>(k)];
  return worst_margin(cp.problem, x);
}

double tube_factor(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) raise(ErrorCode::GammaOutOfRange, "tube bound needs 0 < gamma < 1");
  return 2.0 * gamma / (1.0 - gamma);
}

TubeBound tube_bound(double gamma, double ref_norm) {
  TubeBound t;
  t.factor = tube_factor(gamma);
  t.reference_norm = ref_norm;
  t.bound = t.factor * ref_norm;
  return t;
}

ExtendedTrajectory simulate_extended(const ExtendedAt& sys, const SignalAt& eta, const UncertaintyResponse& q,
                                     double T, double dt) {
  if (!(dt > 0.0) || !(T >= dt)) raise(ErrorCode::GridMismatch, "extended simulation needs 0 < dt <= T");
  const auto steps = static_cast<Eigen::Index>(std::llround(T / dt));
  const ExtendedSystem e0 = sys(0.0);
  ExtendedTrajectory tr;
  tr.dt = dt;
  tr.chi.resize(steps + 1, e0.states());
  tr.q.resize(steps + 1, e0.q_dim());
  tr.eta.resize(steps + 1, e0.eta_dim());
  tr.r.resize(steps + 1, e0.r_dim());
  tr.z.resize(steps + 1, e0.z_dim());
  auto deriv = [&](const Vec& chi, double t) -> Vec {
    const ExtendedSystem e = sys(t);
    const Vec et = eta(t);
    return e.Acal * chi + e.B1 * q(et, t) + e.B2 * et;
  };
  Vec chi = Vec::Zero(e0.states());
  for (Eigen::Index k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const ExtendedSystem e = sys(t);
    const Vec et = eta(t);
    const Vec qt = q(et, t);
    tr.chi.row(k) = chi.transpose();
    tr.q.row(k) = qt.transpose();
    tr.eta.row(k) = et.transpose();
    tr.r.row(k) = (e.C1 * chi + e.D11 * qt + e.D12 * et).transpose();
    tr.z.row(k) = (e.C2 * chi + e.D21 * qt + e.D22 * et).transpose();
    if (k == steps) break;
    const Vec k1 = deriv(chi, t);
    const Vec k2 = deriv(chi + 0.5 * dt * k1, t + 0.5 * dt);
    const Vec k3 = deriv(chi + 0.5 * dt * k2, t + 0.5 * dt);
    const Vec k4 = deriv(chi + dt * k3, t + dt);
    chi += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return tr;
}

namespace {

void check_traj(const ExtendedTrajectory& tr, const Mat& P, const Mat& WM) {
  const auto N = tr.chi.rows();
  if (tr.z.rows() != N || tr.eta.rows() != N || tr.r.rows() != N)
    raise(ErrorCode::GridMismatch, "trajectory signals have different sample counts");
  if (!(tr.dt > 0.0)) raise(ErrorCode::GridMismatch, "trajectory spacing must be positive");
  if (P.rows() != tr.chi.cols() || WM.rows() != tr.r.cols())
    raise(ErrorCode::DimensionMismatch, "witness does not match trajectory dimensions");
}

Vec supply(const ExtendedTrajectory& tr, const Mat& WM, double gamma) {
  const auto N = tr.chi.rows();
  Vec s(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const double zz = tr.z.row(k).squaredNorm(), ee = tr.eta.row(k).squaredNorm();
    const double rr = tr.r.row(k) * WM * tr.r.row(k).transpose();
    s[k] = zz / (gamma * gamma) - ee + rr;
  }
  return s;
}

}  // namespace

double check_dissipation(const ExtendedTrajectory& tr, const Mat& P, const Mat& weighted_M, double gamma) {
  check_traj(tr, P, weighted_M);
  const auto N = tr.chi.rows();
  if (N < 3) raise(ErrorCode::GridMismatch, "need at least three samples for central differences");
  const Vec s = supply(tr, weighted_M, gamma);
  Vec V(N);
  for (Eigen::Index k = 0; k < N; ++k) V[k] = tr.chi.row(k) * P * tr.chi.row(k).transpose();
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k + 1 < N; ++k) worst = std::max(worst, (V[k + 1] - V[k - 1]) / (2 * tr.dt) + s[k]);
  return worst;
}

double integrated_dissipation(const ExtendedTrajectory& tr, const Mat& P, const Mat& weighted_M, double gamma) {
  check_traj(tr, P, weighted_M);
  const Vec s = supply(tr, weighted_M, gamma);
  double acc = 0.0, worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < tr.chi.rows(); ++k) {
    if (k > 0) acc += 0.5 * tr.dt * (s[k - 1] + s[k]);
    const double V = tr.chi.row(k) * P * tr.chi.row(k).transpose();
    worst = std::max(worst, V + acc);
  }
  return worst;
}

nlohmann::ordered_json certificate_to_json(const Certificate& cert) {
  nlohmann::ordered_json j;
  j["metric"] = to_string(cert.metric);
  j["level"] = cert.level;
  if (cert.metric == Metric::Rise && cert.level < 1.0)
    j["factor_2g_over_1mg"] = tube_factor(cert.level);
  else
    j["factor_2g_over_1mg"] = nullptr;
  j["vertices"] = cert.vertices;
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& s : cert.trace) trace.push_back({{"level", s.level}, {"feasible", s.feasible}});
  j["bisection_trace"] = std::move(trace);
  j["witness_eigs"] = vector_to_json(cert.witness_eigs);
  j["witness_margin"] = cert.margin;
  j["witness_P"] = matrix_to_json(cert.P);
  j["witness_lambda"] = vector_to_json(cert.lambda);
  j["lambda_blocks"] = cert.lambda_blocks;
  return j;
}

Certificate certificate_from_json(const nlohmann::json& j) {
  Certificate c;
  try {
    const std::string metric = j.at("metric").get<std::string>();
    if (metric != "RISE" && metric != "SSE") raise(ErrorCode::InputError, "unknown certificate metric " + metric);
    c.metric = metric == "RISE" ? Metric::Rise : Metric::Sse;
    c.level = j.at("level").get<double>();
    c.vertices = j.at("vertices").get<int>();
    for (const auto& s : j.at("bisection_trace"))
      c.trace.push_back({s.at("level").get<double>(), s.at("feasible").get<bool>()});
    c.witness_eigs = vector_from_json(j.at("witness_eigs"));
    c.margin = j.value("witness_margin", 0.0);
    c.P = matrix_from_json(j.at("witness_P"));
    c.lambda = vector_from_json(j.at("witness_lambda"));
    c.lambda_blocks = j.at("lambda_blocks").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InputError, std::string("malformed certificate: ") + e.what());
  }
  return c;
}

}  // namespace keepclose
