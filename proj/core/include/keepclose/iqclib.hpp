#pragma once

#include <string>
#include <vector>

#include "keepclose/sysmodels.hpp"

namespace keepclose {

// Hard-IQC factor (Psi, M). The filter is stored in the split layout
//   psi' = A psi + Bq q + Bp p,   r = C psi + Dq q + Dp p
// so that combining factors yields the (q..., p...) input stacking directly.
struct IqcFactor {
  Mat A, Bq, Bp, C, Dq, Dp;
  Mat M;
  // Sizes of the diagonal blocks of M that may carry separate multipliers.
  std::vector<int> blocks;

  int states() const { return static_cast<int>(A.rows()); }
  int q_dim() const { return static_cast<int>(Bq.cols()); }
  int p_dim() const { return static_cast<int>(Bp.cols()); }
  int r_dim() const { return static_cast<int>(C.rows()); }
  bool is_static() const { return states() == 0; }

  // Filter as a state space with inputs ordered (p, q).
  StateSpace psi() const;
};

struct UncertaintyClass {
  enum class Kind { Sector, Norm };
  Kind kind = Kind::Sector;
  Vec alpha;
  Vec beta;
  double c = 0.0;
  int q_dim = 1;
  int p_dim = 1;

  static UncertaintyClass sector(Vec alpha, Vec beta);
  static UncertaintyClass norm(double c, int q_dim = 1, int p_dim = 1);

  // Pointwise membership of a sample (p, q).
  bool contains(const Vec& p, const Vec& q, double tol = 0.0) const;
  IqcFactor factor() const;
};

IqcFactor sector_iqc(const Vec& alpha, const Vec& beta);
IqcFactor norm_bound_iqc(double c, int q_dim = 1, int p_dim = 1);
IqcFactor combine(const std::vector<IqcFactor>& factors);

// r(t) for sampled p, q (one sample per row); dynamic filters are integrated
// with RK4 from psi(0) = 0 using linear interpolation of the inputs.
Mat iqc_output(const IqcFactor& f, const Mat& p, const Mat& q, double dt);

// Trapezoidal prefix integrals of r' M r, one entry per grid point.
std::vector<double> hard_iqc_prefix(const IqcFactor& f, const Mat& p, const Mat& q, double dt);

// Integral of r' M r over [0, T]; T must lie on the sample grid.
double eval_hard_iqc(const IqcFactor& f, const Mat& p, const Mat& q, double dt, double T);

UncertaintyClass uncertainty_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UncertaintyClass& u);

}  // namespace keepclose
