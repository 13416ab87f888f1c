#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

#include "keepclose/errors.hpp"

namespace keepclose::cli {

struct RunConfig {
  std::string scenario = "arm";
  std::string metric = "both";
  std::optional<std::pair<double, double>> gamma_range;
  std::optional<double> gamma_max;
  std::optional<std::pair<double, double>> sigma_range;
  double tol = 1e-4;
  double dt = 0.0;
  double T = 0.0;
  int grid = 0;
  std::size_t vertex_cap = 4096;
  std::string out = "keepclose_out";
  std::uint64_t seed = 1;
  bool paper_sign = false;
  std::string dump_lmi;
  std::string certificate;
  std::string lambda_mode = "auto";
  double delta_gain = 1.0;
  int random_count = 50;
  bool all_csv = false;
  int epochs = 0;
};

enum ExitCode : int {
  kOk = 0,
  kInfeasible = 2,
  kInputError = 3,
  kNonFinite = 4,
  kValidationFailed = 5,
  kInternal = 1,
};

int exit_code_for(ErrorCode code);

int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// "a:b" with 0 < a <= b.
std::pair<double, double> parse_range(const std::string& text);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace keepclose::cli
