#include "keepclose/scenarios.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "keepclose/errors.hpp"
#include "keepclose/parallel.hpp"

namespace keepclose {

namespace {

constexpr double kPi = 3.14159265358979323846;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Vec scalar(double v) { return Vec::Constant(1, v); }

Mat columns(const Mat& m, const std::vector<int>& cols) {
  Mat out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- arm

Vec arm_plant_field(const Vec& s, double tau) {
  Vec d(2);
  d << -10.0 * std::sin(s[1]) - 2.0 * s[0] + tau, s[0];
  return d;
}

Vec arm_plant_field_rearranged(const Vec& s, double tau, double q) {
  Vec d(2);
  d << -10.0 * s[1] - 2.0 * s[0] + tau + 10.0 * q, s[0];
  return d;
}

Vec arm_reference(const Vec& s, double r) {
  Vec d(2);
  d << -9.0 * s[1] - 6.0 * s[0] + 9.0 * r, s[0];
  return d;
}

double arm_ideal_controller(const Vec& s, double r, bool paper_sign) {
  const double tau = 10.0 * std::sin(s[1]) - 9.0 * s[1] - 4.0 * s[0] + 9.0 * r;
  return paper_sign ? -tau : tau;
}

double arm_delta(double theta, double theta_max) {
  if (!(std::abs(theta) <= theta_max)) raise(ErrorCode::DomainExceeded, "arm angle outside the declared sector domain");
  return theta - std::sin(theta);
}

UncertaintyClass arm_delta_class(const ArmParams& params) {
  return UncertaintyClass::sector(Vec::Zero(1), scalar(params.sector_beta));
}

double arm_teacher(double theta) { return 10.0 * std::sin(theta) - 10.0 * theta; }

StateSpace arm_plant_model() {
  Mat A(2, 2), B(2, 2), C(1, 2);
  A << -6, -9, 1, 0;
  B << 1, 10, 0, 0;
  C << 0, 1;
  return new_state_space(A, B, C, Mat::Zero(1, 2), 1);
}

StateSpace arm_reference_model() {
  const StateSpace p = arm_plant_model();
  return new_state_space(p.A(), p.B_control(), p.C(), p.D_control(), 1);
}

Architecture arm_architecture() {
  Architecture a;
  a.input_dim = 1;
  a.hidden = {8};
  a.hidden_act = {Activation::Tanh};
  a.output_dim = 1;
  a.odd = true;
  return a;
}

MlpController train_arm_net(std::uint64_t seed, const FitOptions& options) {
  const double h = ArmParams{}.theta_max;
  return fit_to_teacher([](const Vec& y) { return scalar(arm_teacher(y[0])); }, scalar(-h), scalar(h),
                        arm_architecture(), seed, options);
}

NamedReference arm_case_a() {
  return {"case_a", [](double t) { return 0.8 * std::sin(0.5 * t); }};
}

NamedReference arm_case_b() {
  return {"case_b", [](double t) { return 0.7 * std::sin(0.2 * t + 0.02 * t * t); }};
}

std::vector<NamedReference> arm_random_references(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<NamedReference> out;
  for (int i = 0; i < count; ++i) {
    std::array<double, 3> amp{}, freq{}, phase{};
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      amp[k] = unit_uniform(rng);
      total += amp[k];
      freq[k] = 0.1 + 1.4 * unit_uniform(rng);
      phase[k] = 2.0 * kPi * unit_uniform(rng);
    }
    const double level = 0.3 + 0.7 * unit_uniform(rng);
    for (double& a : amp) a *= level / total;
    out.push_back({"random_" + std::to_string(i + 1), [amp, freq, phase](double t) {
                     double r = 0.0;
                     for (int k = 0; k < 3; ++k) r += amp[k] * std::sin(freq[k] * t + phase[k]);
                     return r;
                   }});
  }
  return out;
}

Loop arm_plant_loop(const MlpController& net, ScalarSignal r, double delta_gain) {
  Loop l;
  l.field = [delta_gain](const Vec& x, const Vec& u, double) {
    const double tau = u[0] - 4.0 * x[0] + x[1];
    return arm_plant_field_rearranged(x, tau, delta_gain * (x[1] - std::sin(x[1])));
  };
  l.output = [](const Vec& x, double) { return scalar(x[1]); };
  l.controller = [net, r](const Vec& y, double t) { return Vec(scalar(9.0 * r(t)) + forward(net, y)); };
  return l;
}

Loop arm_reference_loop(ScalarSignal r, bool full_state) {
  Loop l;
  l.field = [](const Vec& x, const Vec& u, double) {
    Vec d(2);
    d << -6.0 * x[0] - 9.0 * x[1] + u[0], x[0];
    return d;
  };
  if (full_state)
    l.output = [](const Vec& x, double) { return x; };
  else
    l.output = [](const Vec& x, double) { return scalar(x[1]); };
  l.controller = [r](const Vec&, double t) { return scalar(9.0 * r(t)); };
  return l;
}

Loop arm_ideal_loop(ScalarSignal r, bool paper_sign) {
  Loop l;
  l.field = [](const Vec& x, const Vec& u, double) { return arm_plant_field(x, u[0] - 4.0 * x[0] + x[1]); };
  l.output = [](const Vec& x, double) { return x; };
  l.controller = [r, paper_sign](const Vec& y, double t) {
    return scalar(arm_ideal_controller(y, r(t), paper_sign) + 4.0 * y[0] - y[1]);
  };
  return l;
}

// ---------------------------------------------------------------- apollo

Eigen::Vector3d apollo_drag_force(const ApolloParams& p, const Eigen::Vector3d& v, const Eigen::Vector3d& wind) {
  const Eigen::Vector3d rel = v - wind;
  return -0.5 * p.rho * p.drag_coefficient * p.area * rel.norm() * rel;
}

Eigen::Vector3d apollo_clamp_thrust(const ApolloParams& p, const Eigen::Vector3d& request) {
  const double lo = p.throttle_min * p.thrust_max, hi = p.throttle_max * p.thrust_max;
  const double n = request.norm();
  if (n == 0.0) return Eigen::Vector3d(0.0, 0.0, lo);
  return request * (std::clamp(n, lo, hi) / n);
}

Eigen::Vector3d apollo_thrust_for(const ApolloParams& p, double mass, const Eigen::Vector3d& accel) {
  return apollo_clamp_thrust(p, mass * (accel + Eigen::Vector3d(0.0, 0.0, p.gravity)));
}

Vec apollo_dynamics(const ApolloParams& p, const Vec& s, const Eigen::Vector3d& thrust,
                    const Eigen::Vector3d& wind) {
  if (s.size() != 7) raise(ErrorCode::DimensionMismatch, "lander state is (r, v, m)");
  const double m = s[6];
  if (!(m > p.dry_mass)) raise(ErrorCode::MassDepleted, "lander mass reached the dry-mass floor");
  const Eigen::Vector3d v = s.segment<3>(3);
  Vec d(7);
  d.head<3>() = v;
  d.segment<3>(3) = (thrust + apollo_drag_force(p, v, wind)) / m - Eigen::Vector3d(0.0, 0.0, p.gravity);
  d[6] = -thrust.norm() / p.exhaust_velocity();
  return d;
}

double apollo_tgo(const GuidanceState& s, const GuidanceTarget& tg) {
  const double at = tg.a.z(), b = s.v.z() + 2.0 * tg.v.z(), d = tg.r.z() - s.r.z();
  double T = 0.0;
  if (std::abs(at) > 0.0) {
    const double disc = (b / at) * (b / at) + 6.0 * (s.r.z() - tg.r.z()) / at;
    if (!(disc >= 0.0)) raise(ErrorCode::NoPositiveTgo, "time-to-go quadratic has no real root");
    T = b / at + std::sqrt(disc);
  } else {
    if (b == 0.0) raise(ErrorCode::NoPositiveTgo, "time-to-go denominator vanishes");
    T = 3.0 * d / b;
  }
  if (!(T > 0.0) || !std::isfinite(T)) raise(ErrorCode::NoPositiveTgo, "time-to-go is not positive");
  return T;
}

GuidanceCoefficients apollo_coefficients(const GuidanceState& s, const GuidanceTarget& tg, double T) {
  if (!(T > 0.0)) raise(ErrorCode::NonPositiveTgo, "t_go must be positive");
  const Eigen::Vector3d dr = tg.r - s.r;
  GuidanceCoefficients c;
  c.C0 = tg.a - 6.0 * (tg.v + s.v) / T + 12.0 * dr / (T * T);
  c.C1 = -6.0 * tg.a / T + 6.0 * (5.0 * tg.v + 3.0 * s.v) / (T * T) - 48.0 * dr / (T * T * T);
  c.C2 = 6.0 * tg.a / (T * T) - 12.0 * (2.0 * tg.v + s.v) / (T * T * T) + 36.0 * dr / (T * T * T * T);
  return c;
}

Eigen::Vector3d apollo_acmd(const GuidanceState& s, const GuidanceTarget& tg, double T) {
  return apollo_coefficients(s, tg, T).C0;
}

Eigen::Vector3d apollo_rd(const GuidanceTarget& tg, double T) {
  return tg.r + tg.v * T + tg.a * T * T / 2.0 + tg.jerk * T * T * T / 6.0 + tg.snap * T * T * T * T / 24.0;
}

Vec apollo_reference(const ApolloParams& p, const Vec& s, const Vec& u) {
  Vec d(6);
  d.head<3>() = s.tail<3>();
  d.tail<3>() = p.a.cwiseProduct(s.tail<3>()) + u;
  return d;
}

Vec apollo_teacher(const ApolloParams& p, const Vec& y) {
  const double w = p.omega;
  Vec u(3);
  for (int i = 0; i < 3; ++i) u[i] = -w * w * y[i] - (2.0 * w + p.a[i]) * y[3 + i];
  return u;
}

Eigen::Vector3d apollo_delta(const ApolloParams& p, const Eigen::Vector3d& v, double mass) {
  if (!(mass >= p.sector_mass_min && mass <= p.m0) || !(v.norm() <= p.v_box.norm()))
    raise(ErrorCode::DomainExceeded, "velocity or mass outside the declared envelope");
  return -p.drag_gain(mass) * v.norm() * v - p.a.cwiseProduct(v);
}

UncertaintyClass apollo_delta_class(const ApolloParams& p, int samples, double margin) {
  Vec lo(3), hi(3);
  const double smax = p.v_box.norm();
  for (int i = 0; i < 3; ++i) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    for (int a = 0; a <= samples; ++a) {
      const double speed = smax * a / samples;
      for (int b = 0; b <= samples; ++b) {
        const double m = p.sector_mass_min + (p.m0 - p.sector_mass_min) * b / samples;
        const double slope = -p.drag_gain(m) * speed - p.a[i];
        amin = std::min(amin, slope);
        amax = std::max(amax, slope);
      }
    }
    const double s = margin * std::max(std::abs(amin), std::abs(amax));
    lo[i] = amin - s;
    hi[i] = amax + s;
  }
  return UncertaintyClass::sector(lo, hi);
}

double apollo_fit_drag_gain(const ApolloParams& p, double mass, const std::vector<double>& speeds) {
  if (speeds.empty()) raise(ErrorCode::EmptyList, "drag fit needs samples");
  double num = 0.0, den = 0.0;
  for (double s : speeds) {
    num += p.drag_gain(mass) * s * s * s;
    den += s * s;
  }
  if (!(den > 0.0)) raise(ErrorCode::ZeroDenominator, "drag fit samples are all zero");
  return -num / den;
}

Architecture apollo_axis_architecture(int width) {
  Architecture a;
  a.input_dim = 2;
  a.hidden = {width, width, width};
  a.hidden_act = {Activation::Tanh, Activation::Sigmoid, Activation::Tanh};
  a.output_dim = 1;
  a.odd = true;
  return a;
}

MlpController train_apollo_net(const ApolloParams& p, std::uint64_t seed, const FitOptions& options) {
  const std::array<int, 3> widths{14, 13, 13};
  const int H = widths[0] + widths[1] + widths[2];
  std::vector<Layer> layers(4);
  layers[0] = {Mat::Zero(H, 6), Vec::Zero(H), Activation::Tanh};
  layers[1] = {Mat::Zero(H, H), Vec::Zero(H), Activation::Sigmoid};
  layers[2] = {Mat::Zero(H, H), Vec::Zero(H), Activation::Tanh};
  layers[3] = {Mat::Zero(3, H), Vec::Zero(3), Activation::Linear};
  int at = 0;
  for (int i = 0; i < 3; ++i) {
    const int w = widths[static_cast<std::size_t>(i)];
    Vec lo(2), hi(2);
    lo << -p.r_box[i], -p.v_box[i];
    hi = -lo;
    auto teacher = [&p, i](const Vec& y) {
      return scalar(-p.omega * p.omega * y[0] - (2.0 * p.omega + p.a[i]) * y[1]);
    };
    const MlpController axis =
        fit_to_teacher(teacher, lo, hi, apollo_axis_architecture(w), seed + static_cast<std::uint64_t>(i), options);
    const auto& L = axis.layers();
    layers[0].W.block(at, i, w, 1) = L[0].W.col(0);
    layers[0].W.block(at, 3 + i, w, 1) = L[0].W.col(1);
    layers[0].b.segment(at, w) = L[0].b;
    for (int l = 1; l < 3; ++l) {
      layers[static_cast<std::size_t>(l)].W.block(at, at, w, w) = L[static_cast<std::size_t>(l)].W;
      layers[static_cast<std::size_t>(l)].b.segment(at, w) = L[static_cast<std::size_t>(l)].b;
    }
    layers[3].W.block(i, at, 1, w) = L[3].W;
    layers[3].b[i] = L[3].b[0];
    at += w;
  }
  return MlpController(std::move(layers));
}

MlpController apollo_axis_net(const MlpController& net, int axis) {
  if (net.input_dim() != 6 || net.output_dim() != 3 || axis < 0 || axis > 2)
    raise(ErrorCode::DimensionMismatch, "lander net must map (r, v) to three accelerations");
  const auto& L = net.layers();
  std::vector<int> units;
  for (Eigen::Index r = 0; r < L[0].W.rows(); ++r) {
    const bool own = L[0].W(r, axis) != 0.0 || L[0].W(r, 3 + axis) != 0.0;
    for (Eigen::Index c = 0; c < 6; ++c)
      if (c != axis && c != 3 + axis && L[0].W(r, c) != 0.0 && own)
        raise(ErrorCode::DimensionMismatch, "lander net is not block-sparse per axis");
    if (own) units.push_back(static_cast<int>(r));
  }
  const auto n = static_cast<Eigen::Index>(units.size());
  std::vector<Layer> out(L.size());
  out[0].W.resize(n, 2);
  out[0].b.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out[0].W(k, 0) = L[0].W(units[k], axis);
    out[0].W(k, 1) = L[0].W(units[k], 3 + axis);
    out[0].b[k] = L[0].b[units[k]];
  }
  out[0].act = L[0].act;
  for (std::size_t l = 1; l < L.size(); ++l) {
    const bool last = l + 1 == L.size();
    const Eigen::Index rows = last ? 1 : n;
    out[l].W.resize(rows, n);
    out[l].b.resize(rows);
    out[l].act = L[l].act;
    for (Eigen::Index a = 0; a < rows; ++a) {
      const int src = last ? axis : units[a];
      for (Eigen::Index c = 0; c < n; ++c) out[l].W(a, c) = L[l].W(src, units[c]);
      out[l].b[a] = L[l].b[src];
    }
  }
  return MlpController(std::move(out));
}

Loop apollo_plant_loop(const ApolloParams& p, const MlpController& net, double delta_gain) {
  Loop l;
  l.field = [p, delta_gain](const Vec& x, const Vec& u, double) {
    const Eigen::Vector3d F = apollo_thrust_for(p, x[6], u.head<3>());
    Vec d = apollo_dynamics(p, x, F, p.wind);
    d.segment<3>(3) += (delta_gain - 1.0) * apollo_drag_force(p, x.segment<3>(3), p.wind) / x[6];
    return d;
  };
  l.output = [](const Vec& x, double) { return Vec(x.head<6>()); };
  l.controller = [net](const Vec& y, double) { return forward(net, y); };
  return l;
}

Loop apollo_reference_loop(const ApolloParams& p) {
  Loop l;
  l.field = [p](const Vec& x, const Vec& u, double) { return apollo_reference(p, x, u); };
  l.output = [](const Vec& x, double) { return x; };
  l.controller = [p](const Vec& y, double) { return apollo_teacher(p, y); };
  return l;
}

// ---------------------------------------------------------------- bundles

Mat Channel::z_of(const Trajectory& tr) const { return columns(tr.y, z_cols) - columns(tr.yhat, z_cols); }

Mat Channel::eta_of(const Trajectory& tr) const {
  Mat both(tr.y.rows(), tr.y.cols() + tr.yhat.cols());
  both << tr.y, tr.yhat;
  return columns(both, eta_cols);
}

std::string fixture_dir() {
  if (const char* env = std::getenv("KEEPCLOSE_FIXTURE_DIR")) return env;
#ifdef KEEPCLOSE_DEFAULT_FIXTURE_DIR
  return KEEPCLOSE_DEFAULT_FIXTURE_DIR;
#else
  return "fixtures";
#endif
}

namespace {

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void maybe_vec3(const nlohmann::json& j, const char* key, Eigen::Vector3d& field) {
  if (!j.contains(key)) return;
  const Vec v = vector_from_json(j.at(key));
  if (v.size() != 3) raise(ErrorCode::InputError, std::string(key) + " must have three entries");
  field = v;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir) {
  Scenario s;
  try {
    s.kind = j.at("kind").get<std::string>();
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    if (s.kind == "arm") {
      auto& a = s.arm;
      maybe(params, "mass", a.mass);
      maybe(params, "length", a.length);
      maybe(params, "friction", a.friction);
      maybe(params, "theta_max", a.theta_max);
      maybe(params, "sector_beta", a.sector_beta);
      maybe(params, "T", a.T);
      maybe(params, "dt", a.dt);
      maybe(params, "grid", a.grid);
      maybe(params, "jacobian_splits", a.jacobian_splits);
    } else if (s.kind == "apollo") {
      auto& a = s.apollo;
      maybe_vec3(params, "p0", a.p0);
      maybe_vec3(params, "v0", a.v0);
      maybe_vec3(params, "a0", a.a0);
      maybe(params, "m0", a.m0);
      maybe(params, "area", a.area);
      maybe(params, "gravity", a.gravity);
      maybe(params, "thrust_max", a.thrust_max);
      maybe(params, "throttle_min", a.throttle_min);
      maybe(params, "throttle_max", a.throttle_max);
      maybe(params, "rho", a.rho);
      maybe(params, "drag_coefficient", a.drag_coefficient);
      maybe(params, "isp", a.isp);
      maybe(params, "g0", a.g0);
      maybe(params, "dry_mass", a.dry_mass);
      maybe_vec3(params, "a", a.a);
      maybe_vec3(params, "wind", a.wind);
      maybe(params, "omega", a.omega);
      maybe_vec3(params, "r_box", a.r_box);
      maybe_vec3(params, "v_box", a.v_box);
      maybe(params, "sector_mass_min", a.sector_mass_min);
      maybe(params, "T", a.T);
      maybe(params, "dt", a.dt);
      maybe(params, "grid", a.grid);
      maybe(params, "jacobian_splits", a.jacobian_splits);
    } else {
      raise(ErrorCode::InputError, "unknown scenario kind '" + s.kind + "'");
    }
    const std::string weights = j.at("weights").get<std::string>();
    const std::filesystem::path wp = std::filesystem::path(weights).is_absolute()
                                         ? std::filesystem::path(weights)
                                         : std::filesystem::path(base_dir) / weights;
    s.net = load_weights(wp.string());
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InputError, std::string("malformed scenario: ") + e.what());
  }
  const int expect_in = s.kind == "arm" ? 1 : 6, expect_out = s.kind == "arm" ? 1 : 3;
  if (s.net.input_dim() != expect_in || s.net.output_dim() != expect_out)
    raise(ErrorCode::InputError, "controller weights do not fit the " + s.kind + " scenario");
  return s;
}

Scenario load_scenario(const std::string& name_or_path) {
  std::filesystem::path path(name_or_path);
  if (name_or_path == "arm" || name_or_path == "apollo") path = std::filesystem::path(fixture_dir()) / (name_or_path + ".json");
  std::ifstream f(path);
  if (!f) raise(ErrorCode::InputError, "cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InputError, "scenario file is not valid JSON: " + std::string(e.what()));
  }
  Scenario s = scenario_from_json(j, path.parent_path().string());
  s.source = path.string();
  return s;
}

namespace {

std::vector<Channel> arm_channels(const Scenario& sc, const ChannelOptions& opt) {
  const ArmParams& p = sc.arm;
  const int grid = opt.grid > 0 ? opt.grid : p.grid;
  const Vec lo = scalar(-p.theta_max), hi = scalar(p.theta_max);
  Channel ch;
  ch.name = "theta";
  ch.iqc_group = "theta";
  EpsilonOptions eo;
  eo.kind = EpsilonKind::Sector;
  eo.sector_input = {0};
  ch.eps = estimate_epsilon(sc.net, [](const Vec&) { return Vec(Vec::Zero(1)); }, lo, hi, grid, eo);
  ch.classes = {arm_delta_class(p), UncertaintyClass::sector(ch.eps.alpha, ch.eps.beta)};
  ch.xi = combine({ch.classes[0].factor(), ch.classes[1].factor()});
  ch.lambda_box = jacobian_box(sc.net, lo, hi, p.jacobian_splits);
  const StateSpace plant = arm_plant_model();
  const ErrorSystem err = build_error_system(plant, arm_reference_model());
  for (const Mat& L : vertices(ch.lambda_box, opt.vertex_cap))
    ch.vertices.push_back(build_extended(err, controller_error_gain(L, plant), ch.xi));
  ch.z_cols = {0};
  ch.eta_cols = {0, 1};
  const MlpController net = sc.net;
  ch.iqc_signals = [net](const Run& run) {
    const Trajectory& tr = run.traj;
    const auto N = tr.samples();
    Mat P(N, 2), Q(N, 2);
    for (Eigen::Index k = 0; k < N; ++k) {
      const double th = tr.y(k, 0), thr = tr.yhat(k, 0);
      P(k, 0) = th;
      P(k, 1) = thr;
      Q(k, 0) = run.delta_gain * (th - std::sin(th));
      Q(k, 1) = forward(net, scalar(thr))[0];
    }
    return std::make_pair(P, Q);
  };
  return {ch};
}

std::vector<Channel> apollo_channels(const Scenario& sc, const ChannelOptions& opt) {
  const ApolloParams& p = sc.apollo;
  const int grid = opt.grid > 0 ? opt.grid : p.grid;
  const UncertaintyClass delta = apollo_delta_class(p);
  const char* axes[3] = {"x", "y", "z"};
  std::vector<Channel> out;
  for (int i = 0; i < 3; ++i) {
    const MlpController net = sc.net;
    const MlpController sub = apollo_axis_net(net, i);
    auto axis_teacher = [p, i](const Vec& y2) {
      return scalar(-p.omega * p.omega * y2[0] - (2.0 * p.omega + p.a[i]) * y2[1]);
    };
    Vec alo(2), ahi(2);
    alo << -p.r_box[i], -p.v_box[i];
    ahi = -alo;
    EpsilonOptions eo;
    eo.kind = EpsilonKind::RelativeNorm;
    const EpsilonBound eps = estimate_epsilon(sub, axis_teacher, alo, ahi, grid, eo);

    Mat A(2, 2), B(2, 2);
    A << 0, 1, 0, p.a[i];
    B << 0, 0, 1, 1;
    const StateSpace plant = new_state_space(A, B, Mat::Identity(2, 2), Mat::Zero(2, 2), 1);
    const StateSpace ref = new_state_space(A, B.leftCols(1), Mat::Identity(2, 2), Mat::Zero(2, 1), 1);
    const ErrorSystem err = build_error_system(plant, ref);

    std::vector<UncertaintyClass> classes{UncertaintyClass::sector(scalar(delta.alpha[i]), scalar(delta.beta[i])),
                                          UncertaintyClass::norm(eps.c, 1, 2)};
    const IqcFactor xi = combine({classes[0].factor(), classes[1].factor()});
    Mat S = Mat::Zero(3, 4);
    S(0, 1) = 1.0;
    S(1, 2) = 1.0;
    S(2, 3) = 1.0;
    const IntervalMatrix box = jacobian_box(sub, alo, ahi, p.jacobian_splits);
    std::vector<ExtendedSystem> base;
    for (const Mat& L : vertices(box, opt.vertex_cap))
      base.push_back(build_extended(err, controller_error_gain(L, plant), xi, S));

    auto signals = [p, net, i](const Run& run) {
      const Trajectory& tr = run.traj;
      const auto N = tr.samples();
      Mat P(N, 3), Q(N, 2);
      for (Eigen::Index k = 0; k < N; ++k) {
        const Vec x = tr.x.row(k).transpose();
        const Vec u = tr.u.row(k).transpose();
        const Eigen::Vector3d F = apollo_thrust_for(p, x[6], u.head<3>());
        const Eigen::Vector3d v = x.segment<3>(3);
        const Eigen::Vector3d accel =
            (F + run.delta_gain * apollo_drag_force(p, v, p.wind)) / x[6] - Eigen::Vector3d(0.0, 0.0, p.gravity);
        const Vec yh = tr.yhat.row(k).transpose();
        P(k, 0) = v[i];
        P(k, 1) = yh[i];
        P(k, 2) = yh[3 + i];
        Q(k, 0) = accel[i] - p.a[i] * v[i] - u[i];
        Q(k, 1) = forward(net, yh)[i] - apollo_teacher(p, yh)[i];
      }
      return std::make_pair(P, Q);
    };

    for (int row = 0; row < 2; ++row) {
      Channel ch;
      ch.name = std::string(axes[i]) + (row == 0 ? "_position" : "_velocity");
      ch.iqc_group = axes[i];
      ch.eps = eps;
      ch.classes = classes;
      ch.xi = xi;
      ch.lambda_box = box;
      for (const auto& e : base) ch.vertices.push_back(select_outputs(e, {row}));
      ch.z_cols = {row == 0 ? i : 3 + i};
      ch.eta_cols = {i, 3 + i, 6 + i, 9 + i};
      ch.iqc_signals = signals;
      out.push_back(std::move(ch));
    }
  }
  return out;
}

}  // namespace

std::vector<Channel> make_channels(const Scenario& scenario, const ChannelOptions& options) {
  if (scenario.kind == "arm") return arm_channels(scenario, options);
  if (scenario.kind == "apollo") return apollo_channels(scenario, options);
  raise(ErrorCode::InputError, "unknown scenario kind '" + scenario.kind + "'");
}

std::vector<Run> bundled_runs(const Scenario& sc, const RunOptions& opt) {
  struct Job {
    std::string name;
    std::function<Trajectory()> run;
  };
  std::vector<Job> jobs;
  if (sc.kind == "arm") {
    const double dt = opt.dt > 0.0 ? opt.dt : sc.arm.dt, T = opt.T > 0.0 ? opt.T : sc.arm.T;
    std::vector<NamedReference> refs{arm_case_a(), arm_case_b()};
    for (auto& r : arm_random_references(opt.random_count, opt.seed)) refs.push_back(std::move(r));
    const Vec x0 = Vec::Zero(2);
    for (const auto& ref : refs)
      jobs.push_back({ref.name, [&sc, ref, dt, T, x0, &opt] {
                        return simulate_closed_loop(arm_plant_loop(sc.net, ref.r, opt.delta_gain),
                                                    arm_reference_loop(ref.r), x0, x0, T, dt);
                      }});
    if (opt.include_ideal) {
      const NamedReference a = arm_case_a();
      jobs.push_back({"ideal_case_a", [a, dt, T, x0, &opt] {
                        return simulate_closed_loop(arm_ideal_loop(a.r, opt.paper_sign),
                                                    arm_reference_loop(a.r, true), x0, x0, T, dt);
                      }});
    }
  } else if (sc.kind == "apollo") {
    const ApolloParams& p = sc.apollo;
    const double dt = opt.dt > 0.0 ? opt.dt : p.dt, T = opt.T > 0.0 ? opt.T : p.T;
    std::vector<std::pair<std::string, Vec>> starts;
    Vec s0(6);
    s0 << p.p0, p.v0;
    starts.emplace_back("landing", s0);
    Vec s1(6);
    s1 << 0.8 * p.p0, 0.8 * p.v0;
    starts.emplace_back("landing_near", s1);
    for (const auto& [name, xh0] : starts)
      jobs.push_back({name, [&sc, &p, xh0 = xh0, dt, T, &opt] {
                        Vec x0(7);
                        x0 << xh0, p.m0;
                        return simulate_closed_loop(apollo_plant_loop(p, sc.net, opt.delta_gain),
                                                    apollo_reference_loop(p), x0, xh0, T, dt);
                      }});
  } else {
    raise(ErrorCode::InputError, "unknown scenario kind '" + sc.kind + "'");
  }
  std::vector<Run> runs(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) { runs[k] = Run{jobs[k].name, jobs[k].run(), opt.delta_gain}; });
  return runs;
}

}  // namespace keepclose
