#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "keepclose/errorsys.hpp"
#include "keepclose/iqclib.hpp"
#include "keepclose/nncontroller.hpp"
#include "keepclose/simkit.hpp"

namespace keepclose {

using ScalarSignal = std::function<double(double)>;

struct NamedReference {
  std::string name;
  ScalarSignal r;
};

// ---------------------------------------------------------------- arm

struct ArmParams {
  double mass = 0.15;
  double length = 0.5;
  double friction = 0.5;
  double theta_max = 1.5707963267948966;
  double sector_beta = 0.364;
  double T = 20.0;
  double dt = 1e-3;
  int grid = 2001;
  int jacobian_splits = 1;
};

// State (omega, theta).
Vec arm_plant_field(const Vec& state, double tau);
Vec arm_plant_field_rearranged(const Vec& state, double tau, double q);
Vec arm_reference(const Vec& state, double r);
double arm_ideal_controller(const Vec& state_r, double r, bool paper_sign = false);
double arm_delta(double theta, double theta_max = 1.5707963267948966);
UncertaintyClass arm_delta_class(const ArmParams& params = {});
double arm_teacher(double theta);

// Plant in the virtual input u = tau + 4 omega - theta with the disturbance
// column for q = theta - sin(theta); the reference shares (A, B, C, D).
StateSpace arm_plant_model();
StateSpace arm_reference_model();

Architecture arm_architecture();
MlpController train_arm_net(std::uint64_t seed, const FitOptions& options = {});

NamedReference arm_case_a();
NamedReference arm_case_b();
std::vector<NamedReference> arm_random_references(int count, std::uint64_t seed);

Loop arm_plant_loop(const MlpController& net, ScalarSignal r, double delta_gain = 1.0);
Loop arm_reference_loop(ScalarSignal r, bool full_state = false);
// Plant driven by the ideal law evaluated on its own full state.
Loop arm_ideal_loop(ScalarSignal r, bool paper_sign);

// ---------------------------------------------------------------- apollo

struct ApolloParams {
  Eigen::Vector3d p0{-5632.2, 709.25, 6190.5};
  Eigen::Vector3d v0{206.48, -26.006, -103.51};
  Eigen::Vector3d a0{-2.1124, 0.24947, -2.6404};
  double m0 = 600.3;
  double area = 5.137426149499100;
  double gravity = 3.725258;
  double thrust_max = 3600.0;
  double throttle_min = 0.30;
  double throttle_max = 1.00;
  double rho = 0.023;
  double drag_coefficient = 2.0;
  double isp = 225.0;
  double g0 = 9.80665;
  double dry_mass = 300.0;
  Eigen::Vector3d a{-0.0087, -0.0075, -0.0077};
  Eigen::Vector3d wind{0.0, 0.0, 0.0};
  double omega = 0.05;
  Eigen::Vector3d r_box{6200.0, 800.0, 6900.0};
  Eigen::Vector3d v_box{230.0, 30.0, 120.0};
  double sector_mass_min = 380.0;
  double T = 200.0;
  double dt = 0.05;
  int grid = 401;
  int jacobian_splits = 16;

  double exhaust_velocity() const { return g0 * isp; }
  double drag_gain(double mass) const { return 0.5 * rho * drag_coefficient * area / mass; }
};

// State (r, v, m) in the local east-north-up frame.
Vec apollo_dynamics(const ApolloParams& params, const Vec& state, const Eigen::Vector3d& thrust_force,
                    const Eigen::Vector3d& wind);
Eigen::Vector3d apollo_drag_force(const ApolloParams& params, const Eigen::Vector3d& v, const Eigen::Vector3d& wind);
Eigen::Vector3d apollo_clamp_thrust(const ApolloParams& params, const Eigen::Vector3d& request);
// Thrust producing the commanded non-gravitational acceleration, clamped.
Eigen::Vector3d apollo_thrust_for(const ApolloParams& params, double mass, const Eigen::Vector3d& accel);

struct GuidanceState {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

struct GuidanceTarget {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d jerk = Eigen::Vector3d::Zero();
  Eigen::Vector3d snap = Eigen::Vector3d::Zero();
};

struct GuidanceCoefficients {
  Eigen::Vector3d C0, C1, C2;
};

double apollo_tgo(const GuidanceState& state, const GuidanceTarget& target);
GuidanceCoefficients apollo_coefficients(const GuidanceState& state, const GuidanceTarget& target, double t_go);
Eigen::Vector3d apollo_acmd(const GuidanceState& state, const GuidanceTarget& target, double t_go);
Eigen::Vector3d apollo_rd(const GuidanceTarget& target, double t_go);

// Reference state (r_hat, v_hat); dv_hat/dt = a v_hat + u.
Vec apollo_reference(const ApolloParams& params, const Vec& state, const Vec& u);
// Per-axis critically damped law on (r, v).
Vec apollo_teacher(const ApolloParams& params, const Vec& y);
Eigen::Vector3d apollo_delta(const ApolloParams& params, const Eigen::Vector3d& v, double mass);
// Sampled slope hull of apollo_delta over the velocity envelope and mass range.
UncertaintyClass apollo_delta_class(const ApolloParams& params, int samples = 60, double margin = 0.05);
// Least-squares linear coefficient fitting drag acceleration along one axis.
double apollo_fit_drag_gain(const ApolloParams& params, double mass, const std::vector<double>& speeds);

Architecture apollo_axis_architecture(int width);
// The two-input subnet (r_i, v_i) -> u_i of a block-sparse lander net.
MlpController apollo_axis_net(const MlpController& net, int axis);
MlpController train_apollo_net(const ApolloParams& params, std::uint64_t seed, const FitOptions& options = {});

Loop apollo_plant_loop(const ApolloParams& params, const MlpController& net, double delta_gain = 1.0);
Loop apollo_reference_loop(const ApolloParams& params);

// ---------------------------------------------------------------- bundles

// One certification problem together with the signal maps needed to check
// it against simulated runs.
struct Run {
  std::string name;
  Trajectory traj;
  double delta_gain = 1.0;
};

struct Channel {
  std::string name;
  std::vector<ExtendedSystem> vertices;
  IqcFactor xi;
  std::vector<UncertaintyClass> classes;
  IntervalMatrix lambda_box;
  EpsilonBound eps;
  // Columns of y (and yhat) forming z.
  std::vector<int> z_cols;
  // Columns of [y, yhat] forming eta.
  std::vector<int> eta_cols;
  // Channels of one group share their uncertainty signals.
  std::string iqc_group;
  // Stacked (p, q) of the combined factor along a run.
  std::function<std::pair<Mat, Mat>(const Run&)> iqc_signals;

  Mat z_of(const Trajectory& tr) const;
  Mat eta_of(const Trajectory& tr) const;
};

struct Scenario {
  std::string kind;
  std::string source;
  ArmParams arm;
  ApolloParams apollo;
  MlpController net;
};

// "arm", "apollo", or a path to a scenario JSON file.
Scenario load_scenario(const std::string& name_or_path);
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir);
std::string fixture_dir();

struct ChannelOptions {
  std::size_t vertex_cap = 4096;
  int grid = 0;  // 0 keeps the scenario default
};

std::vector<Channel> make_channels(const Scenario& scenario, const ChannelOptions& options = {});

struct RunOptions {
  double dt = 0.0;  // 0 keeps the scenario default
  double T = 0.0;
  std::uint64_t seed = 1;
  int random_count = 50;
  bool paper_sign = false;
  bool include_ideal = false;
  double delta_gain = 1.0;
};

std::vector<Run> bundled_runs(const Scenario& scenario, const RunOptions& options = {});

}  // namespace keepclose
