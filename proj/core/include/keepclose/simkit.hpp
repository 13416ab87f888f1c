#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "keepclose/errors.hpp"
#include "keepclose/sysmodels.hpp"

namespace keepclose {

// Uniformly sampled closed-loop run of a plant and its reference model.
// Every matrix holds one sample per row.
struct Trajectory {
  double dt = 0.0;
  Vec t;
  Mat x, xhat, y, yhat, u, uhat;

  Eigen::Index samples() const { return t.size(); }
  Mat z() const { return y - yhat; }
};

using Field = std::function<Vec(const Vec& x, const Vec& u, double t)>;
using OutputMap = std::function<Vec(const Vec& x, double t)>;
using Feedback = std::function<Vec(const Vec& y, double t)>;

// One loop: x' = field(x, controller(output(x, t), t), t).
struct Loop {
  Field field;
  OutputMap output;
  Feedback controller;
};

struct SimOptions {
  // Zero-order hold of the control over each step instead of evaluating the
  // controller at every Runge-Kutta stage.
  bool control_hold = false;
};

class NonFiniteStateError : public Error {
 public:
  NonFiniteStateError(const std::string& msg, Trajectory partial)
      : Error(ErrorCode::NonFiniteState, msg), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

// Classical RK4 for a single autonomous-in-time field; returns samples per row.
Mat integrate_rk4(const std::function<Vec(const Vec&, double)>& f, const Vec& x0, double T, double dt);

Trajectory simulate_closed_loop(const Loop& plant, const Loop& reference, const Vec& x0, const Vec& xhat0,
                                double T, double dt, const SimOptions& options = {});

double empirical_rise(const Mat& y, const Mat& yhat, double dt);
double empirical_sse(const Mat& y, const Mat& yhat, double dt);

// Ratio of an arbitrary error signal against an arbitrary normalising signal:
// ||z||_2 / ||eta||_2 or ||z||_inf / ||eta||_2.
double energy_ratio(const Mat& z, const Mat& eta, double dt);
double peak_ratio(const Mat& z, const Mat& eta, double dt);

struct RunningMetrics {
  Vec rise;
  Vec sse;
};

// Metrics over every prefix [0, t_k]; zero while the denominator vanishes.
RunningMetrics running_metrics(const Mat& y, const Mat& yhat, double dt);

// CSV with 9 significant digits and the header
// t,y_1..,yhat_1..,u_1..,uhat_1..,rise_running,sse_running
void write_csv(std::ostream& out, const Trajectory& traj);
void write_csv(const std::string& path, const Trajectory& traj);

}  // namespace keepclose
