#include "keepclose/simkit.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace keepclose {

namespace {

Eigen::Index step_count(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) raise(ErrorCode::GridMismatch, "dt must be positive");
  if (!(T >= dt) || !std::isfinite(T)) raise(ErrorCode::GridMismatch, "T must be at least dt");
  return static_cast<Eigen::Index>(std::llround(T / dt));
}

Vec rk4_step(const std::function<Vec(const Vec&, double)>& f, const Vec& x, double t, double dt) {
  const Vec k1 = f(x, t);
  const Vec k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt);
  const Vec k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt);
  const Vec k4 = f(x + dt * k3, t + dt);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_pair(const Mat& y, const Mat& yhat, double dt) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    raise(ErrorCode::GridMismatch, "signals must share the sample grid and dimension");
  if (!(dt > 0.0)) raise(ErrorCode::GridMismatch, "dt must be positive");
}

Trajectory truncate(const Trajectory& tr, Eigen::Index n) {
  Trajectory out;
  out.dt = tr.dt;
  out.t = tr.t.head(n);
  out.x = tr.x.topRows(n);
  out.xhat = tr.xhat.topRows(n);
  out.y = tr.y.topRows(n);
  out.yhat = tr.yhat.topRows(n);
  out.u = tr.u.topRows(n);
  out.uhat = tr.uhat.topRows(n);
  return out;
}

}  // namespace

Mat integrate_rk4(const std::function<Vec(const Vec&, double)>& f, const Vec& x0, double T, double dt) {
  const auto steps = step_count(T, dt);
  Mat out(steps + 1, x0.size());
  Vec x = x0;
  out.row(0) = x.transpose();
  for (Eigen::Index k = 0; k < steps; ++k) {
    x = rk4_step(f, x, static_cast<double>(k) * dt, dt);
    if (!x.allFinite()) raise(ErrorCode::NonFiniteState, "state left the finite range");
    out.row(k + 1) = x.transpose();
  }
  return out;
}

Trajectory simulate_closed_loop(const Loop& plant, const Loop& reference, const Vec& x0, const Vec& xhat0,
                                double T, double dt, const SimOptions& options) {
  const auto steps = step_count(T, dt);
  Vec x = x0, xh = xhat0;
  const Vec y0 = plant.output(x, 0.0), yh0 = reference.output(xh, 0.0);
  const Vec u0 = plant.controller(y0, 0.0), uh0 = reference.controller(yh0, 0.0);

  Trajectory tr;
  tr.dt = dt;
  tr.t.resize(steps + 1);
  tr.x.resize(steps + 1, x.size());
  tr.xhat.resize(steps + 1, xh.size());
  tr.y.resize(steps + 1, y0.size());
  tr.yhat.resize(steps + 1, yh0.size());
  tr.u.resize(steps + 1, u0.size());
  tr.uhat.resize(steps + 1, uh0.size());

  auto closed = [&options](const Loop& loop, const Vec& held) {
    return [&loop, &options, &held](const Vec& s, double t) -> Vec {
      const Vec u = options.control_hold ? held : loop.controller(loop.output(s, t), t);
      return loop.field(s, u, t);
    };
  };

  for (Eigen::Index k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vec y = plant.output(x, t), yh = reference.output(xh, t);
    const Vec u = plant.controller(y, t), uh = reference.controller(yh, t);
    tr.t[k] = t;
    tr.x.row(k) = x.transpose();
    tr.xhat.row(k) = xh.transpose();
    tr.y.row(k) = y.transpose();
    tr.yhat.row(k) = yh.transpose();
    tr.u.row(k) = u.transpose();
    tr.uhat.row(k) = uh.transpose();
    if (!(x.allFinite() && xh.allFinite() && y.allFinite() && yh.allFinite() && u.allFinite() && uh.allFinite()))
      throw NonFiniteStateError("non-finite state at t = " + std::to_string(t), truncate(tr, k));
    if (k == steps) break;
    x = rk4_step(closed(plant, u), x, t, dt);
    xh = rk4_step(closed(reference, uh), xh, t, dt);
    if (!(x.allFinite() && xh.allFinite()))
      throw NonFiniteStateError("non-finite state after t = " + std::to_string(t), truncate(tr, k + 1));
  }
  return tr;
}

double energy_ratio(const Mat& z, const Mat& eta, double dt) {
  if (z.rows() != eta.rows()) raise(ErrorCode::GridMismatch, "signals must share the sample grid");
  const double den = signal_norms(eta, dt).l2;
  if (!(den > 0.0)) raise(ErrorCode::ZeroDenominator, "normalising signal has zero energy");
  return signal_norms(z, dt).l2 / den;
}

double peak_ratio(const Mat& z, const Mat& eta, double dt) {
  if (z.rows() != eta.rows()) raise(ErrorCode::GridMismatch, "signals must share the sample grid");
  const double den = signal_norms(eta, dt).l2;
  if (!(den > 0.0)) raise(ErrorCode::ZeroDenominator, "normalising signal has zero energy");
  return signal_norms(z, dt).linf / den;
}

double empirical_rise(const Mat& y, const Mat& yhat, double dt) {
  check_pair(y, yhat, dt);
  Mat eta(y.rows(), 2 * y.cols());
  eta << y, yhat;
  return energy_ratio(y - yhat, eta, dt);
}

double empirical_sse(const Mat& y, const Mat& yhat, double dt) {
  check_pair(y, yhat, dt);
  Mat eta(y.rows(), 2 * y.cols());
  eta << y, yhat;
  return peak_ratio(y - yhat, eta, dt);
}

RunningMetrics running_metrics(const Mat& y, const Mat& yhat, double dt) {
  check_pair(y, yhat, dt);
  const auto n = y.rows();
  RunningMetrics m;
  m.rise = Vec::Zero(n);
  m.sse = Vec::Zero(n);
  double num = 0.0, den = 0.0, peak = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double zz = (y.row(k) - yhat.row(k)).squaredNorm();
    const double ee = y.row(k).squaredNorm() + yhat.row(k).squaredNorm();
    if (k > 0) {
      const double zz0 = (y.row(k - 1) - yhat.row(k - 1)).squaredNorm();
      const double ee0 = y.row(k - 1).squaredNorm() + yhat.row(k - 1).squaredNorm();
      num += 0.5 * dt * (zz0 + zz);
      den += 0.5 * dt * (ee0 + ee);
    }
    peak = std::max(peak, std::sqrt(zz));
    if (den > 0.0) {
      m.rise[k] = std::sqrt(num / den);
      m.sse[k] = peak / std::sqrt(den);
    }
  }
  return m;
}

void write_csv(std::ostream& out, const Trajectory& tr) {
  const auto p = tr.y.cols(), mu = tr.u.cols();
  out << "t";
  for (Eigen::Index i = 0; i < p; ++i) out << ",y_" << i + 1;
  for (Eigen::Index i = 0; i < p; ++i) out << ",yhat_" << i + 1;
  for (Eigen::Index i = 0; i < mu; ++i) out << ",u_" << i + 1;
  for (Eigen::Index i = 0; i < mu; ++i) out << ",uhat_" << i + 1;
  out << ",rise_running,sse_running\n";
  const RunningMetrics rm = running_metrics(tr.y, tr.yhat, tr.dt);
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(9) << std::defaultfloat;
  for (Eigen::Index k = 0; k < tr.samples(); ++k) {
    out << tr.t[k];
    for (Eigen::Index i = 0; i < p; ++i) out << ',' << tr.y(k, i);
    for (Eigen::Index i = 0; i < p; ++i) out << ',' << tr.yhat(k, i);
    for (Eigen::Index i = 0; i < mu; ++i) out << ',' << tr.u(k, i);
    for (Eigen::Index i = 0; i < mu; ++i) out << ',' << tr.uhat(k, i);
    out << ',' << rm.rise[k] << ',' << rm.sse[k] << '\n';
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

void write_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream f(path);
  if (!f) raise(ErrorCode::InputError, "cannot open " + path + " for writing");
  write_csv(f, tr);
}

}  // namespace keepclose
