#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "keepclose/certify.hpp"
#include "keepclose/parallel.hpp"
#include "keepclose/scenarios.hpp"
#include "keepclose/simkit.hpp"

namespace keepclose::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InfeasibleAtUpper:
      return kInfeasible;
    case ErrorCode::NonFiniteState:
    case ErrorCode::MassDepleted:
      return kNonFinite;
    case ErrorCode::ValidationFailure:
      return kValidationFailed;
    case ErrorCode::InputError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteEntry:
    case ErrorCode::EmptyList:
    case ErrorCode::VertexExplosion:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::BoundOrder:
    case ErrorCode::NegativeBound:
    case ErrorCode::GridMismatch:
    case ErrorCode::ModelMismatch:
    case ErrorCode::NonPositiveGamma:
    case ErrorCode::NonPositiveSigma:
    case ErrorCode::NonPositiveS:
    case ErrorCode::GammaOutOfRange:
    case ErrorCode::UnsupportedStructure:
    case ErrorCode::DomainExceeded:
      return kInputError;
    default:
      return kInternal;
  }
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) raise(ErrorCode::InputError, "range '" + text + "' must look like a:b");
  double a = 0.0, b = 0.0;
  try {
    std::size_t used = 0;
    a = std::stod(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const std::string tail = text.substr(colon + 1);
    b = std::stod(tail, &used);
    if (used != tail.size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    raise(ErrorCode::InputError, "range '" + text + "' is not numeric");
  }
  if (!(a > 0.0) || !(b >= a) || !std::isfinite(b)) raise(ErrorCode::InputError, "range needs 0 < a <= b");
  return {a, b};
}

namespace {

struct ChannelCertificate {
  std::string channel;
  Certificate cert;
};

std::string lower(Metric m) { return m == Metric::Rise ? "rise" : "sse"; }

std::vector<Metric> metrics_of(const std::string& m) {
  if (m == "rise") return {Metric::Rise};
  if (m == "sse") return {Metric::Sse};
  if (m == "both") return {Metric::Rise, Metric::Sse};
  raise(ErrorCode::InputError, "metric must be rise, sse or both");
}

LambdaMode lambda_mode_of(const std::string& m) {
  if (m == "auto") return LambdaMode::Auto;
  if (m == "single") return LambdaMode::Single;
  if (m == "per-factor") return LambdaMode::PerFactor;
  raise(ErrorCode::InputError, "lambda mode must be auto, single or per-factor");
}

std::string certificate_name(Metric m, const std::string& channel, bool single) {
  return "certificate_" + lower(m) + (single ? "" : "_" + channel) + ".json";
}

CertifyOptions options_for(const RunConfig& cfg, const Scenario& sc, Metric m) {
  CertifyOptions o;
  o.hi = sc.kind == "apollo" ? 1000.0 : 10.0;
  const auto& range = m == Metric::Rise ? cfg.gamma_range : cfg.sigma_range;
  if (range) {
    o.lo = range->first;
    o.hi = range->second;
  }
  if (m == Metric::Rise && cfg.gamma_max) {
    o.hi = *cfg.gamma_max;
    o.lo = std::min(o.lo, o.hi);
  }
  if (!(o.lo > 0.0) || !(o.hi >= o.lo)) raise(ErrorCode::InputError, "search range needs 0 < lo <= hi");
  if (!(cfg.tol > 0.0)) raise(ErrorCode::InputError, "--tol must be positive");
  o.tol_bisect = cfg.tol;
  o.lambda_mode = lambda_mode_of(cfg.lambda_mode);
  return o;
}

void check_config(const RunConfig& cfg) {
  if (cfg.dt < 0.0 || cfg.T < 0.0) raise(ErrorCode::InputError, "--dt and --T must be positive");
  if (cfg.dt > 0.0 && cfg.T > 0.0 && cfg.T < cfg.dt) raise(ErrorCode::InputError, "--T must be at least --dt");
  if (cfg.grid < 0) raise(ErrorCode::InputError, "--grid must be positive");
  if (cfg.vertex_cap == 0) raise(ErrorCode::InputError, "--vertex-cap must be positive");
  if (!(cfg.delta_gain >= 0.0)) raise(ErrorCode::InputError, "--delta-gain must be nonnegative");
}

std::vector<Channel> channels_for(const RunConfig& cfg, const Scenario& sc) {
  ChannelOptions co;
  co.vertex_cap = cfg.vertex_cap;
  co.grid = cfg.grid;
  return make_channels(sc, co);
}

std::vector<ChannelCertificate> certify_all(const RunConfig& cfg, const Scenario& sc,
                                            const std::vector<Channel>& channels, const std::vector<Metric>& metrics) {
  struct Job {
    std::size_t channel;
    Metric metric;
  };
  std::vector<Job> jobs;
  for (Metric m : metrics)
    for (std::size_t c = 0; c < channels.size(); ++c) jobs.push_back({c, m});
  std::vector<ChannelCertificate> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    const Channel& ch = channels[jobs[k].channel];
    const CertifyOptions o = options_for(cfg, sc, jobs[k].metric);
    out[k].channel = ch.name;
    out[k].cert = jobs[k].metric == Metric::Rise ? certify_rise(ch.vertices, ch.xi, o)
                                                 : certify_sse(ch.vertices, ch.xi, SseMode::Bisect, o);
  });
  return out;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream f(path);
  if (!f) raise(ErrorCode::InputError, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::ordered_json certificate_file(const ChannelCertificate& c, const Scenario& sc) {
  nlohmann::ordered_json j = certificate_to_json(c.cert);
  j["channel"] = c.channel;
  j["scenario"] = sc.kind;
  return j;
}

void dump_lmis(const RunConfig& cfg, const Scenario& sc, const std::vector<Channel>& channels,
               const std::vector<Metric>& metrics) {
  std::ofstream f(cfg.dump_lmi);
  if (!f) raise(ErrorCode::InputError, "cannot write " + cfg.dump_lmi);
  for (const Channel& ch : channels)
    for (Metric m : metrics) {
      const CertifyOptions o = options_for(cfg, sc, m);
      const auto blocks = lambda_blocks(ch.xi, o.lambda_mode == LambdaMode::PerFactor ? LambdaMode::PerFactor
                                                                                     : LambdaMode::Single);
      const CertProblem cp = m == Metric::Rise ? rise_lmi(ch.vertices, ch.xi.M, blocks, o.hi)
                                               : sse_lmis(ch.vertices, ch.xi.M, blocks, o.hi);
      f << "# channel " << ch.name << " metric " << lower(m) << " level " << o.hi << '\n';
      cp.problem.dump(f);
    }
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const NonFiniteStateError& e) {
    err << "error: " << e.what() << " (partial trajectory of " << e.partial().samples() << " samples)\n";
    return kNonFinite;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

RunOptions run_options(const RunConfig& cfg) {
  RunOptions ro;
  ro.dt = cfg.dt;
  ro.T = cfg.T;
  ro.seed = cfg.seed;
  ro.random_count = cfg.random_count;
  ro.paper_sign = cfg.paper_sign;
  ro.delta_gain = cfg.delta_gain;
  return ro;
}

bool is_case_study(const std::string& name) { return name.rfind("random_", 0) != 0; }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

struct Row {
  std::string check, subject, value, bound;
  bool pass;
};

}  // namespace

int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(cfg);
    const Scenario sc = load_scenario(cfg.scenario);
    const auto metrics = metrics_of(cfg.metric);
    const auto channels = channels_for(cfg, sc);
    if (!cfg.dump_lmi.empty()) dump_lmis(cfg, sc, channels, metrics);
    const auto certs = certify_all(cfg, sc, channels, metrics);
    fs::create_directories(cfg.out);
    const bool single = channels.size() == 1;
    for (const auto& c : certs) {
      const fs::path path = fs::path(cfg.out) / certificate_name(c.cert.metric, c.channel, single);
      write_json(path, certificate_file(c, sc));
      out << to_string(c.cert.metric) << ' ' << c.channel << " level=" << fmt(c.cert.level);
      if (c.cert.metric == Metric::Rise && c.cert.level < 1.0) out << " factor=" << fmt(tube_factor(c.cert.level));
      out << " vertices=" << c.cert.vertices << " -> " << path.string() << '\n';
    }
    return static_cast<int>(kOk);
  });
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(cfg);
    const Scenario sc = load_scenario(cfg.scenario);
    ChannelOptions co;
    co.vertex_cap = cfg.vertex_cap;
    co.grid = cfg.grid;
    RunOptions ro = run_options(cfg);
    ro.include_ideal = sc.kind == "arm";
    const auto runs = bundled_runs(sc, ro);
    const auto channels = make_channels(sc, co);
    fs::create_directories(cfg.out);
    nlohmann::ordered_json manifest;
    manifest["scenario"] = sc.kind;
    manifest["seed"] = cfg.seed;
    manifest["runs"] = nlohmann::ordered_json::array();
    for (const Run& run : runs) {
      nlohmann::ordered_json r;
      r["name"] = run.name;
      r["dt"] = run.traj.dt;
      r["samples"] = run.traj.samples();
      const bool write = cfg.all_csv || is_case_study(run.name);
      if (write) {
        const fs::path csv = fs::path(cfg.out) / (run.name + ".csv");
        write_csv(csv.string(), run.traj);
        r["csv"] = csv.filename().string();
      } else {
        r["csv"] = nullptr;
      }
      if (run.name.rfind("ideal_", 0) == 0) {
        r["max_state_error"] = (run.traj.x - run.traj.xhat).cwiseAbs().maxCoeff();
      } else {
        const RunningMetrics rm = running_metrics(run.traj.y, run.traj.yhat, run.traj.dt);
        r["peak_running_rise"] = rm.rise.maxCoeff();
        r["peak_running_sse"] = rm.sse.maxCoeff();
        nlohmann::ordered_json per = nlohmann::ordered_json::array();
        for (const Channel& ch : channels) {
          const Mat z = ch.z_of(run.traj), eta = ch.eta_of(run.traj);
          per.push_back({{"channel", ch.name},
                         {"rise", energy_ratio(z, eta, run.traj.dt)},
                         {"sse", peak_ratio(z, eta, run.traj.dt)}});
        }
        r["channels"] = std::move(per);
      }
      if (write) {
        out << run.name;
        if (r.contains("peak_running_rise"))
          out << " peak_running_rise=" << fmt(r["peak_running_rise"].get<double>())
              << " peak_running_sse=" << fmt(r["peak_running_sse"].get<double>());
        else
          out << " max_state_error=" << fmt(r["max_state_error"].get<double>());
        out << '\n';
      }
      manifest["runs"].push_back(std::move(r));
    }
    write_json(fs::path(cfg.out) / "metrics.json", manifest);
    out << runs.size() << " runs -> " << (fs::path(cfg.out) / "metrics.json").string() << '\n';
    return static_cast<int>(kOk);
  });
}

namespace {

std::vector<ChannelCertificate> load_certificates(const RunConfig& cfg, const std::vector<Channel>& channels,
                                                  const std::vector<Metric>& metrics) {
  std::vector<ChannelCertificate> out;
  auto read = [](const fs::path& p) {
    std::ifstream f(p);
    if (!f) raise(ErrorCode::InputError, "cannot open certificate " + p.string());
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::InputError, "certificate " + p.string() + " is not valid JSON");
    }
    return j;
  };
  const fs::path src(cfg.certificate);
  if (fs::is_directory(src)) {
    for (Metric m : metrics)
      for (const Channel& ch : channels) {
        const fs::path p = src / certificate_name(m, ch.name, channels.size() == 1);
        out.push_back({ch.name, certificate_from_json(read(p))});
        if (out.back().cert.metric != m) raise(ErrorCode::InputError, p.string() + " holds the wrong metric");
      }
    return out;
  }
  const nlohmann::json j = read(src);
  const std::string name = j.value("channel", channels.size() == 1 ? channels.front().name : std::string());
  if (std::none_of(channels.begin(), channels.end(), [&](const Channel& c) { return c.name == name; }))
    raise(ErrorCode::InputError, "certificate names no channel of this scenario");
  out.push_back({name, certificate_from_json(j)});
  return out;
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    check_config(cfg);
    const Scenario sc = load_scenario(cfg.scenario);
    const auto metrics = metrics_of(cfg.metric);
    const auto channels = channels_for(cfg, sc);
    const auto certs = cfg.certificate.empty() ? certify_all(cfg, sc, channels, metrics)
                                               : load_certificates(cfg, channels, metrics);
    const auto runs = bundled_runs(sc, run_options(cfg));
    std::map<std::string, const Channel*> by_name;
    for (const Channel& ch : channels) by_name[ch.name] = &ch;

    std::vector<Row> rows;
    for (const auto& c : certs) {
      const Channel& ch = *by_name.at(c.channel);
      const double margin = verify_certificate(c.cert, ch.vertices, ch.xi.M);
      rows.push_back({"witness", c.channel + " " + lower(c.cert.metric) + "@" + fmt(c.cert.level), fmt(margin), "< 0",
                      margin < 0.0});
    }
    for (const Run& run : runs) {
      for (const auto& c : certs) {
        const Channel& ch = *by_name.at(c.channel);
        const Mat z = ch.z_of(run.traj), eta = ch.eta_of(run.traj);
        const double emp = c.cert.metric == Metric::Rise ? energy_ratio(z, eta, run.traj.dt)
                                                         : peak_ratio(z, eta, run.traj.dt);
        rows.push_back({"empirical " + lower(c.cert.metric), run.name + " " + c.channel, fmt(emp),
                        "<= " + fmt(c.cert.level), emp <= c.cert.level});
        const bool full_output = static_cast<Eigen::Index>(ch.z_cols.size()) == run.traj.y.cols();
        if (c.cert.metric == Metric::Rise && full_output && c.cert.level < 1.0) {
          const Mat yh = run.traj.yhat;
          const double lhs = signal_norms(z, run.traj.dt).l2;
          const double rhs = tube_factor(c.cert.level) * signal_norms(yh, run.traj.dt).l2;
          rows.push_back({"tube", run.name + " " + c.channel, fmt(lhs), "< " + fmt(rhs), lhs < rhs});
        }
      }
      std::vector<std::string> seen;
      for (const Channel& ch : channels) {
        if (std::find(seen.begin(), seen.end(), ch.iqc_group) != seen.end()) continue;
        seen.push_back(ch.iqc_group);
        const auto [P, Q] = ch.iqc_signals(run);
        int pc = 0, qc = 0;
        for (std::size_t f = 0; f < ch.classes.size(); ++f) {
          const IqcFactor fac = ch.classes[f].factor();
          const Mat p = P.middleCols(pc, fac.p_dim()), q = Q.middleCols(qc, fac.q_dim());
          pc += fac.p_dim();
          qc += fac.q_dim();
          const auto prefix = hard_iqc_prefix(fac, p, q, run.traj.dt);
          const double worst = *std::min_element(prefix.begin(), prefix.end());
          const std::string what = f == 0 ? "delta" : "epsilon";
          rows.push_back({"iqc " + what, run.name + " " + ch.iqc_group, fmt(worst), ">= -1e-09", worst >= -1e-9});
        }
      }
    }

    bool all = true;
    std::size_t failed = 0;
    out << std::left << std::setw(20) << "check" << std::setw(34) << "subject" << std::setw(16) << "value"
        << std::setw(18) << "bound" << "result\n";
    for (const Row& r : rows) {
      all = all && r.pass;
      if (!r.pass) ++failed;
      if (!r.pass || is_case_study(r.subject.substr(0, r.subject.find(' '))))
        out << std::setw(20) << r.check << std::setw(34) << r.subject << std::setw(16) << r.value << std::setw(18)
            << r.bound << (r.pass ? "PASS" : "FAIL") << '\n';
    }
    out << rows.size() << " checks, " << failed << " failed\n";
    if (!all) {
      for (const Row& r : rows)
        if (!r.pass) {
          err << "validation failure: " << r.check << " on " << r.subject;
          if (r.check.rfind("iqc", 0) == 0)
            err << " (model-class violation: the simulated uncertainty leaves its declared class)";
          err << '\n';
        }
      return static_cast<int>(kValidationFailed);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const fs::path dir(cfg.out);
    if (!fs::is_directory(dir)) raise(ErrorCode::InputError, "output directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().filename().string().rfind("certificate_", 0) == 0 && e.path().extension() == ".json")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::ostringstream md;
    md << "| certificate | channel | metric | level | 2g/(1-g) | vertices |\n|---|---|---|---|---|---|\n";
    for (const auto& p : files) {
      std::ifstream f(p);
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception&) {
        raise(ErrorCode::InputError, p.string() + " is not valid JSON");
      }
      md << "| " << p.filename().string() << " | " << j.value("channel", "") << " | " << j.value("metric", "")
         << " | " << fmt(j.value("level", 0.0)) << " | "
         << (j["factor_2g_over_1mg"].is_null() ? std::string("n/a") : fmt(j["factor_2g_over_1mg"].get<double>()))
         << " | " << j.value("vertices", 0) << " |\n";
    }
    const fs::path metrics = dir / "metrics.json";
    if (fs::exists(metrics)) {
      std::ifstream f(metrics);
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception&) {
        raise(ErrorCode::InputError, metrics.string() + " is not valid JSON");
      }
      md << "\n| run | channel | RISE | SSE |\n|---|---|---|---|\n";
      for (const auto& r : j.at("runs")) {
        if (!r.contains("channels") || !is_case_study(r.at("name").get<std::string>())) continue;
        for (const auto& c : r.at("channels"))
          md << "| " << r.at("name").get<std::string>() << " | " << c.at("channel").get<std::string>() << " | "
             << fmt(c.at("rise").get<double>()) << " | " << fmt(c.at("sse").get<double>()) << " |\n";
      }
    }
    if (files.empty() && !fs::exists(metrics))
      raise(ErrorCode::InputError, "no certificates or metrics found in " + dir.string());
    std::ofstream(dir / "report.md") << md.str();
    out << md.str();
    return static_cast<int>(kOk);
  });
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    FitOptions fo;
    MlpController net;
    if (cfg.scenario == "arm") {
      fo.epochs = cfg.epochs > 0 ? cfg.epochs : 100000;
      fo.learning_rate = 3e-3;
      fo.final_learning_rate = 3e-6;
      fo.grid_per_axis = 201;
      fo.patience = fo.epochs;
      net = train_arm_net(cfg.seed, fo);
    } else if (cfg.scenario == "apollo") {
      fo.epochs = cfg.epochs > 0 ? cfg.epochs : 20000;
      fo.grid_per_axis = 41;
      fo.patience = fo.epochs;
      net = train_apollo_net(ApolloParams{}, cfg.seed, fo);
    } else {
      raise(ErrorCode::InputError, "train supports the arm and apollo scenarios");
    }
    const fs::path path = fs::path(cfg.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_weights(net, path.string());
    out << "weights -> " << path.string() << '\n';
    return static_cast<int>(kOk);
  });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"keepclose: closeness certificates for neural-network controlled systems"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string gamma_range, sigma_range;
  double gamma_max = 0.0;

  auto common = [&](CLI::App* s) {
    s->add_option("--scenario", cfg.scenario, "arm, apollo, or a scenario JSON file");
    s->add_option("--out", cfg.out, "output directory");
    s->add_option("--seed", cfg.seed, "seed for randomized references");
  };
  auto certify_opts = [&](CLI::App* s) {
    s->add_option("--metric", cfg.metric, "rise, sse or both")->check(CLI::IsMember({"rise", "sse", "both"}));
    s->add_option("--gamma-range", gamma_range, "RISE search range a:b");
    s->add_option("--gamma-max", gamma_max, "upper end of the RISE search range");
    s->add_option("--sigma-range", sigma_range, "SSE search range a:b");
    s->add_option("--tol", cfg.tol, "relative bisection tolerance");
    s->add_option("--grid", cfg.grid, "grid density for the epsilon estimate");
    s->add_option("--vertex-cap", cfg.vertex_cap, "maximum number of Jacobian vertices");
    s->add_option("--lambda-mode", cfg.lambda_mode, "auto, single or per-factor")
        ->check(CLI::IsMember({"auto", "single", "per-factor"}));
  };
  auto sim_opts = [&](CLI::App* s) {
    s->add_option("--dt", cfg.dt, "integration step");
    s->add_option("--T", cfg.T, "horizon");
    s->add_flag("--paper-sign-convention", cfg.paper_sign, "use the printed sign of the ideal arm law");
    s->add_option("--delta-gain", cfg.delta_gain, "scale the plant uncertainty (out-of-class test hook)");
    s->add_option("--random-count", cfg.random_count, "number of randomized references");
  };

  CLI::App* certify = app.add_subcommand("certify", "compute RISE/SSE certificates");
  common(certify);
  certify_opts(certify);
  certify->add_option("--dump-lmi", cfg.dump_lmi, "write the LMI problems at the upper level to this file");

  CLI::App* simulate = app.add_subcommand("simulate", "run the bundled closed-loop scenarios");
  common(simulate);
  sim_opts(simulate);
  simulate->add_option("--grid", cfg.grid, "grid density for the epsilon estimate");
  simulate->add_flag("--all-csv", cfg.all_csv, "write CSV files for randomized runs too");

  CLI::App* validate = app.add_subcommand("validate", "check certificates against simulations");
  common(validate);
  certify_opts(validate);
  sim_opts(validate);
  validate->add_option("--certificate", cfg.certificate, "certificate file or directory (default: recompute)");

  CLI::App* report = app.add_subcommand("report", "summarize an output directory");
  report->add_option("--out", cfg.out, "output directory");

  CLI::App* train = app.add_subcommand("train", "fit controller weights to the ideal law");
  common(train);
  train->add_option("--epochs", cfg.epochs, "training epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  const int bad = guarded(err, [&] {
    if (!gamma_range.empty()) cfg.gamma_range = parse_range(gamma_range);
    if (!sigma_range.empty()) cfg.sigma_range = parse_range(sigma_range);
    if (gamma_max != 0.0) {
      if (!(gamma_max > 0.0)) raise(ErrorCode::InputError, "--gamma-max must be positive");
      cfg.gamma_max = gamma_max;
    }
    return static_cast<int>(kOk);
  });
  if (bad != kOk) return bad;

  if (certify->parsed()) return cmd_certify(cfg, out, err);
  if (simulate->parsed()) return cmd_simulate(cfg, out, err);
  if (validate->parsed()) return cmd_validate(cfg, out, err);
  if (report->parsed()) return cmd_report(cfg, out, err);
  if (train->parsed()) return cmd_train(cfg, out, err);
  return kInputError;
}

}  // namespace keepclose::cli
