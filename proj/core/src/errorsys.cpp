#include "keepclose/errorsys.hpp"

#include <string>

#include "keepclose/errors.hpp"

namespace keepclose {

ControllerErrorGain controller_error_gain(const Mat& Lambda, const StateSpace& plant) {
  const int mu = plant.control_dim();
  if (Lambda.rows() != mu || Lambda.cols() != plant.p())
    raise(ErrorCode::DimensionMismatch, "Lambda must be " + std::to_string(mu) + "x" + std::to_string(plant.p()));
  const Mat C = plant.C();
  const Mat Dc = plant.D_control();
  const Mat Dd = plant.D_disturbance();
  ControllerErrorGain g;
  if (Dc.isZero(0.0)) {
    g.G_zeta = Lambda * C;
    g.G_q = Lambda * Dd;
    g.G_eps = Mat::Identity(mu, mu);
    return g;
  }
  const Mat loop = Mat::Identity(mu, mu) - Lambda * Dc;
  Eigen::JacobiSVD<Mat> svd(loop);
  const Vec sv = svd.singularValues();
  if (sv.size() == 0 || sv.minCoeff() <= 0.0 || sv.maxCoeff() / sv.minCoeff() > 1e12)
    raise(ErrorCode::SingularFeedthrough, "I - Lambda D is numerically singular");
  const Mat inv = loop.inverse();
  g.G_zeta = inv * Lambda * C;
  g.G_q = inv * Lambda * Dd;
  g.G_eps = inv;
  return g;
}

ErrorSystem build_error_system(const StateSpace& plant, const StateSpace& reference_check) {
  auto differs = [](const Mat& a, const Mat& b) {
    return a.rows() != b.rows() || a.cols() != b.cols() || (a - b).cwiseAbs().maxCoeff() > 1e-12;
  };
  if (differs(plant.A(), reference_check.A()) ||
      differs(plant.B_control(), reference_check.B_control()) ||
      differs(plant.C(), reference_check.C()) ||
      differs(plant.D_control(), reference_check.D_control()))
    raise(ErrorCode::ModelMismatch, "plant and reference nominal matrices differ");
  return ErrorSystem{plant};
}

ExtendedSystem build_extended(const ErrorSystem& err, const ControllerErrorGain& gain, const IqcFactor& xi,
                              const Mat& p_selector) {
  const StateSpace& P = err.base;
  const int n = P.n(), mu = P.control_dim(), qd = P.disturbance_dim(), py = P.p();
  const int eta = 2 * py;
  const Mat S = p_selector.size() == 0 ? Mat::Identity(eta, eta) : p_selector;
  if (S.cols() != eta || S.rows() != xi.p_dim())
    raise(ErrorCode::DimensionMismatch, "p selector must map eta (" + std::to_string(eta) + ") onto p (" +
                                            std::to_string(xi.p_dim()) + ")");
  if (gain.G_zeta.rows() != mu || gain.G_zeta.cols() != n || gain.G_q.cols() != qd ||
      gain.G_eps.rows() != mu || gain.G_eps.cols() != mu)
    raise(ErrorCode::DimensionMismatch, "controller error gain does not match plant");
  if (xi.q_dim() != qd + mu)
    raise(ErrorCode::DimensionMismatch, "filter q inputs (" + std::to_string(xi.q_dim()) +
                                            ") must equal q_delta + q_eps (" + std::to_string(qd + mu) + ")");
  const int nx = xi.states(), nchi = n + nx, nq = qd + mu, nr = xi.r_dim();
  const Mat A = P.A(), B = P.B_control(), Bt = P.B_disturbance();
  const Mat C = P.C(), D = P.D_control(), Dt = P.D_disturbance();

  ExtendedSystem e;
  e.n_zeta = n;
  e.n_xi = nx;
  e.Acal = Mat::Zero(nchi, nchi);
  e.Acal.topLeftCorner(n, n) = A + B * gain.G_zeta;
  e.Acal.bottomRightCorner(nx, nx) = xi.A;

  e.B1 = Mat::Zero(nchi, nq);
  e.B1.topLeftCorner(n, qd) = B * gain.G_q + Bt;
  e.B1.topRightCorner(n, mu) = B * gain.G_eps;
  e.B1.bottomRows(nx) = xi.Bq;

  e.B2 = Mat::Zero(nchi, eta);
  e.B2.bottomRows(nx) = xi.Bp * S;

  e.C1 = Mat::Zero(nr, nchi);
  e.C1.rightCols(nx) = xi.C;
  e.D11 = xi.Dq;
  e.D12 = xi.Dp * S;

  e.C2 = Mat::Zero(py, nchi);
  e.C2.leftCols(n) = C + D * gain.G_zeta;
  e.D21 = Mat::Zero(py, nq);
  e.D21.leftCols(qd) = Dt + D * gain.G_q;
  e.D21.rightCols(mu) = D * gain.G_eps;
  e.D22 = Mat::Zero(py, eta);
  return e;
}

ExtendedSystem select_outputs(const ExtendedSystem& ext, const std::vector<int>& rows) {
  ExtendedSystem out = ext;
  out.C2.resize(static_cast<Eigen::Index>(rows.size()), ext.C2.cols());
  out.D21.resize(static_cast<Eigen::Index>(rows.size()), ext.D21.cols());
  out.D22.resize(static_cast<Eigen::Index>(rows.size()), ext.D22.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= ext.z_dim()) raise(ErrorCode::DimensionMismatch, "output row out of range");
    const auto r = static_cast<Eigen::Index>(i);
    out.C2.row(r) = ext.C2.row(rows[i]);
    out.D21.row(r) = ext.D21.row(rows[i]);
    out.D22.row(r) = ext.D22.row(rows[i]);
  }
  return out;
}

}  // namespace keepclose
