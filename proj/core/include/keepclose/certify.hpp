#pragma once

#include <functional>
#include <string>
#include <vector>

#include "keepclose/errorsys.hpp"
#include "keepclose/iqclib.hpp"
#include "keepclose/lmi.hpp"

namespace keepclose {

enum class Metric { Rise, Sse };
enum class LambdaMode { Single, PerFactor, Auto };
enum class SseMode { Bisect, Direct };

const char* to_string(Metric m);

// Decision-variable map of a certification problem.
struct CertLayout {
  SymVar P;
  std::vector<int> lambda;  // one per multiplier block ("single" mode: one)
  int sigma2 = -1;          // sigma^2 when it is a decision variable
};

struct CertProblem {
  LmiProblem problem;
  CertLayout layout;
};

// Multiplier blocks used for a given mode: one block spanning M, or the
// factor's own diagonal blocks.
std::vector<int> lambda_blocks(const IqcFactor& xi, LambdaMode mode);

// Block-diagonal sum lambda_k M_k.
Mat lambda_weighted(const Mat& M, const std::vector<int>& blocks, const Vec& lambda);

CertProblem rise_lmi(const std::vector<ExtendedSystem>& vertices, const Mat& M, const std::vector<int>& blocks,
                     double gamma);
CertProblem rise_lmi(const ExtendedSystem& ext, const Mat& M, double gamma);

// sigma <= 0 makes sigma^2 a decision variable with unit objective weight.
CertProblem sse_lmis(const std::vector<ExtendedSystem>& vertices, const Mat& M, const std::vector<int>& blocks,
                     double sigma);
CertProblem sse_lmis(const ExtendedSystem& ext, const Mat& M, double sigma);

struct BisectionStep {
  double level = 0.0;
  bool feasible = false;
};

struct Certificate {
  Metric metric = Metric::Rise;
  double level = 0.0;
  Mat P;
  Vec lambda;
  std::vector<int> lambda_blocks;
  double margin = 0.0;
  int vertices = 0;
  std::vector<BisectionStep> trace;
  Vec witness_eigs;
};

struct CertifyOptions {
  double lo = 1e-4;
  double hi = 10.0;
  double tol_bisect = 1e-4;
  int max_iter = 40;
  LambdaMode lambda_mode = LambdaMode::Auto;
  SolverSettings solver;
};

Certificate certify_rise(const std::vector<ExtendedSystem>& vertices, const IqcFactor& xi,
                         const CertifyOptions& options = {});
Certificate certify_sse(const std::vector<ExtendedSystem>& vertices, const IqcFactor& xi, SseMode mode,
                        const CertifyOptions& options = {});

// Worst "< 0" margin of the certificate's LMIs at its stated level, using
// the stored witness without re-solving.
double verify_certificate(const Certificate& cert, const std::vector<ExtendedSystem>& vertices, const Mat& M);

struct TubeBound {
  double factor = 0.0;
  double reference_norm = 0.0;
  double bound = 0.0;
};

double tube_factor(double gamma);
TubeBound tube_bound(double gamma, double ref_norm);

// Sampled trajectory of the extended system (one sample per row).
struct ExtendedTrajectory {
  double dt = 0.0;
  Mat chi, q, eta, r, z;
};

using ExtendedAt = std::function<ExtendedSystem(double t)>;
using SignalAt = std::function<Vec(double t)>;
using UncertaintyResponse = std::function<Vec(const Vec& eta, double t)>;

// RK4 simulation from chi(0) = 0 with q = response(eta(t), t).
ExtendedTrajectory simulate_extended(const ExtendedAt& sys, const SignalAt& eta, const UncertaintyResponse& q,
                                     double T, double dt);

// max_k [dV/dt + z'z / gamma^2 - eta'eta + r' (lambda M) r] with V = chi' P chi
// and a central-difference dV/dt.
double check_dissipation(const ExtendedTrajectory& traj, const Mat& P, const Mat& weighted_M, double gamma);

// max_T [V(T) + int_0^T (z'z / gamma^2 - eta'eta + r' (lambda M) r)] by the trapezoidal rule.
double integrated_dissipation(const ExtendedTrajectory& traj, const Mat& P, const Mat& weighted_M, double gamma);

nlohmann::ordered_json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const nlohmann::json& j);

}  // namespace keepclose
