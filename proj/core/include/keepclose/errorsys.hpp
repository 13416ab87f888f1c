#pragma once

#include "keepclose/iqclib.hpp"
#include "keepclose/sysmodels.hpp"

namespace keepclose {

// mu = G_zeta * zeta + G_q * q_delta + G_eps * eps
struct ControllerErrorGain {
  Mat G_zeta;
  Mat G_q;
  Mat G_eps;
};

ControllerErrorGain controller_error_gain(const Mat& Lambda, const StateSpace& plant);

// Error dynamics zeta = x - xhat driven by (mu, q_delta), output z = y - yhat.
// `base` carries the plant matrices with the mu columns first (split = m).
struct ErrorSystem {
  StateSpace base;
  int mu_dim() const { return base.control_dim(); }
  int q_dim() const { return base.disturbance_dim(); }
};

ErrorSystem build_error_system(const StateSpace& plant, const StateSpace& reference_check);

// Extended system with state chi = (zeta, xi), inputs (q, eta), outputs
// r (IQC channel) and z (performance channel):
//   chi' = Acal chi + B1 q + B2 eta
//   r    = C1 chi + D11 q + D12 eta
//   z    = C2 chi + D21 q + D22 eta
struct ExtendedSystem {
  Mat Acal, B1, B2, C1, C2, D11, D12, D21, D22;
  Mat Lambda;
  int n_zeta = 0;
  int n_xi = 0;

  int states() const { return static_cast<int>(Acal.rows()); }
  int q_dim() const { return static_cast<int>(B1.cols()); }
  int eta_dim() const { return static_cast<int>(B2.cols()); }
  int r_dim() const { return static_cast<int>(C1.rows()); }
  int z_dim() const { return static_cast<int>(C2.rows()); }
};

// `p_selector` maps eta = (y, yhat) onto the stacked IQC inputs p; an empty
// matrix selects p = eta.
ExtendedSystem build_extended(const ErrorSystem& err, const ControllerErrorGain& gain, const IqcFactor& xi,
                              const Mat& p_selector = Mat());

// Restricts the performance output to the given rows of z.
ExtendedSystem select_outputs(const ExtendedSystem& ext, const std::vector<int>& rows);

}  // namespace keepclose
