#include "keepclose/iqclib.hpp"

#include <cmath>

#include "keepclose/errors.hpp"

namespace keepclose {

StateSpace IqcFactor::psi() const {
  Mat B(A.rows(), p_dim() + q_dim());
  B << Bp, Bq;
  Mat D(C.rows(), p_dim() + q_dim());
  D << Dp, Dq;
  return new_state_space(A, B, C, D);
}

UncertaintyClass UncertaintyClass::sector(Vec alpha, Vec beta) {
  if (alpha.size() != beta.size()) raise(ErrorCode::DimensionMismatch, "sector bounds differ in length");
  if ((alpha.array() > beta.array()).any()) raise(ErrorCode::BoundOrder, "sector alpha exceeds beta");
  UncertaintyClass u;
  u.kind = Kind::Sector;
  u.q_dim = u.p_dim = static_cast<int>(alpha.size());
  u.alpha = std::move(alpha);
  u.beta = std::move(beta);
  return u;
}

UncertaintyClass UncertaintyClass::norm(double c, int q_dim, int p_dim) {
  if (!(c >= 0.0)) raise(ErrorCode::NegativeBound, "norm bound must be nonnegative");
  UncertaintyClass u;
  u.kind = Kind::Norm;
  u.c = c;
  u.q_dim = q_dim;
  u.p_dim = p_dim;
  return u;
}

bool UncertaintyClass::contains(const Vec& p, const Vec& q, double tol) const {
  if (kind == Kind::Norm) return q.norm() <= c * p.norm() + tol;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double a = alpha[i] * p[i], b = beta[i] * p[i];
    if (q[i] < std::min(a, b) - tol || q[i] > std::max(a, b) + tol) return false;
  }
  return true;
}

IqcFactor UncertaintyClass::factor() const {
  return kind == Kind::Sector ? sector_iqc(alpha, beta) : norm_bound_iqc(c, q_dim, p_dim);
}

IqcFactor sector_iqc(const Vec& alpha, const Vec& beta) {
  if (alpha.size() != beta.size()) raise(ErrorCode::DimensionMismatch, "sector bounds differ in length");
  if ((alpha.array() > beta.array()).any()) raise(ErrorCode::BoundOrder, "sector alpha exceeds beta");
  const Eigen::Index k = alpha.size();
  IqcFactor f;
  f.A = Mat::Zero(0, 0);
  f.Bq = Mat::Zero(0, k);
  f.Bp = Mat::Zero(0, k);
  f.C = Mat::Zero(2 * k, 0);
  f.Dq = Mat::Zero(2 * k, k);
  f.Dp = Mat::Zero(2 * k, k);
  f.M = Mat::Zero(2 * k, 2 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    // r = (beta p - q, q - alpha p), M = [[0,1],[1,0]].
    f.Dp(2 * i, i) = beta[i];
    f.Dq(2 * i, i) = -1.0;
    f.Dp(2 * i + 1, i) = -alpha[i];
    f.Dq(2 * i + 1, i) = 1.0;
    f.M(2 * i, 2 * i + 1) = 1.0;
    f.M(2 * i + 1, 2 * i) = 1.0;
    f.blocks.push_back(2);
  }
  return f;
}

IqcFactor norm_bound_iqc(double c, int q_dim, int p_dim) {
  if (!(c >= 0.0)) raise(ErrorCode::NegativeBound, "norm bound must be nonnegative");
  IqcFactor f;
  const int r = p_dim + q_dim;
  f.A = Mat::Zero(0, 0);
  f.Bq = Mat::Zero(0, q_dim);
  f.Bp = Mat::Zero(0, p_dim);
  f.C = Mat::Zero(r, 0);
  f.Dp = Mat::Zero(r, p_dim);
  f.Dq = Mat::Zero(r, q_dim);
  f.Dp.topRows(p_dim).setIdentity();
  f.Dq.bottomRows(q_dim).setIdentity();
  f.M = Mat::Zero(r, r);
  f.M.topLeftCorner(p_dim, p_dim) = c * c * Mat::Identity(p_dim, p_dim);
  f.M.bottomRightCorner(q_dim, q_dim) = -Mat::Identity(q_dim, q_dim);
  f.blocks.push_back(r);
  return f;
}

IqcFactor combine(const std::vector<IqcFactor>& factors) {
  if (factors.empty()) raise(ErrorCode::EmptyList, "combine needs at least one factor");
  if (factors.size() == 1) return factors.front();
  std::vector<Mat> A, Bq, Bp, C, Dq, Dp, M;
  IqcFactor out;
  for (const auto& f : factors) {
    A.push_back(f.A);
    Bq.push_back(f.Bq);
    Bp.push_back(f.Bp);
    C.push_back(f.C);
    Dq.push_back(f.Dq);
    Dp.push_back(f.Dp);
    M.push_back(f.M);
    out.blocks.insert(out.blocks.end(), f.blocks.begin(), f.blocks.end());
  }
  out.A = block_diag(A);
  out.Bq = block_diag(Bq);
  out.Bp = block_diag(Bp);
  out.C = block_diag(C);
  out.Dq = block_diag(Dq);
  out.Dp = block_diag(Dp);
  out.M = block_diag(M);
  return out;
}

Mat iqc_output(const IqcFactor& f, const Mat& p, const Mat& q, double dt) {
  if (p.rows() != q.rows()) raise(ErrorCode::GridMismatch, "p and q have different sample counts");
  if (p.cols() != f.p_dim() || q.cols() != f.q_dim())
    raise(ErrorCode::DimensionMismatch, "signal widths do not match the factor");
  const Eigen::Index N = p.rows();
  Mat r(N, f.r_dim());
  Vec psi = Vec::Zero(f.states());
  auto deriv = [&](const Vec& x, const Vec& pv, const Vec& qv) -> Vec {
    return f.A * x + f.Bq * qv + f.Bp * pv;
  };
  for (Eigen::Index k = 0; k < N; ++k) {
    const Vec pk = p.row(k).transpose(), qk = q.row(k).transpose();
    r.row(k) = (f.C * psi + f.Dq * qk + f.Dp * pk).transpose();
    if (f.is_static() || k + 1 == N) continue;
    const Vec p1 = p.row(k + 1).transpose(), q1 = q.row(k + 1).transpose();
    const Vec pm = 0.5 * (pk + p1), qm = 0.5 * (qk + q1);
    const Vec k1 = deriv(psi, pk, qk);
    const Vec k2 = deriv(psi + 0.5 * dt * k1, pm, qm);
    const Vec k3 = deriv(psi + 0.5 * dt * k2, pm, qm);
    const Vec k4 = deriv(psi + dt * k3, p1, q1);
    psi += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return r;
}

std::vector<double> hard_iqc_prefix(const IqcFactor& f, const Mat& p, const Mat& q, double dt) {
  const Mat r = iqc_output(f, p, q, dt);
  std::vector<double> prefix(static_cast<std::size_t>(r.rows()), 0.0);
  double prev = 0.0, acc = 0.0;
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    const double val = r.row(k) * f.M * r.row(k).transpose();
    if (k > 0) acc += 0.5 * dt * (prev + val);
    prefix[static_cast<std::size_t>(k)] = acc;
    prev = val;
  }
  return prefix;
}

double eval_hard_iqc(const IqcFactor& f, const Mat& p, const Mat& q, double dt, double T) {
  if (p.rows() != q.rows()) raise(ErrorCode::GridMismatch, "p and q have different sample counts");
  if (!(dt > 0.0)) raise(ErrorCode::GridMismatch, "sample spacing must be positive");
  const double steps = T / dt;
  const auto k = static_cast<Eigen::Index>(std::llround(steps));
  if (T < 0.0 || std::abs(steps - static_cast<double>(k)) > 1e-6 || k >= p.rows())
    raise(ErrorCode::GridMismatch, "horizon T is not on the sample grid");
  const auto prefix = hard_iqc_prefix(f, p.topRows(k + 1), q.topRows(k + 1), dt);
  return prefix.back();
}

UncertaintyClass uncertainty_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", std::string());
  if (kind == "sector") return UncertaintyClass::sector(vector_from_json(j.at("alpha")), vector_from_json(j.at("beta")));
  if (kind == "norm")
    return UncertaintyClass::norm(j.at("c").get<double>(), j.value("q_dim", 1), j.value("p_dim", 1));
  raise(ErrorCode::InputError, "uncertainty kind must be 'sector' or 'norm'");
}

nlohmann::json to_json(const UncertaintyClass& u) {
  if (u.kind == UncertaintyClass::Kind::Sector)
    return {{"kind", "sector"}, {"alpha", vector_to_json(u.alpha)}, {"beta", vector_to_json(u.beta)}};
  return {{"kind", "norm"}, {"c", u.c}, {"q_dim", u.q_dim}, {"p_dim", u.p_dim}};
}

}  // namespace keepclose
