#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace keepclose;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("keepclose_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int invoke(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "keepclose");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST(Cli, ParseRange) {
  EXPECT_EQ(cli::parse_range("0.01:2"), std::make_pair(0.01, 2.0));
  EXPECT_KC_ERROR(cli::parse_range("2:1"), ErrorCode::InputError);
  EXPECT_KC_ERROR(cli::parse_range("0:1"), ErrorCode::InputError);
  EXPECT_KC_ERROR(cli::parse_range("abc"), ErrorCode::InputError);
}

TEST(Cli, ExitCodeMapping) {
  EXPECT_EQ(cli::exit_code_for(ErrorCode::InfeasibleAtUpper), 2);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::InputError), 3);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::NonFiniteState), 4);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::ValidationFailure), 5);
}

TEST(Cli, CertifyArm) {
  const auto out = scratch("certify");
  ASSERT_EQ(invoke({"certify", "--scenario", "arm", "--metric", "rise", "--out", out.string()}), 0);
  const auto j = nlohmann::json::parse(slurp(out / "certificate_rise.json"));
  EXPECT_EQ(j["metric"], "RISE");
  EXPECT_GT(j["level"].get<double>(), 0.0);
  EXPECT_TRUE(j.contains("factor_2g_over_1mg"));
}

TEST(Cli, ForcedInfeasibleRange) {
  std::string err;
  EXPECT_EQ(invoke({"certify", "--scenario", "arm", "--metric", "rise", "--gamma-max", "1e-6", "--out",
                    scratch("infeasible").string()},
                   &err),
            2);
  EXPECT_NE(err.find("error"), std::string::npos);
}

TEST(Cli, InputErrors) {
  const auto dir = scratch("input");
  fs::create_directories(dir);
  std::ofstream(dir / "broken.json") << R"({"kind":"arm","weights":"nope.json"})";
  EXPECT_EQ(invoke({"certify", "--scenario", (dir / "broken.json").string(), "--out", (dir / "o").string()}), 3);
  EXPECT_EQ(invoke({"certify", "--scenario", "arm", "--gamma-range", "3:1", "--out", (dir / "o").string()}), 3);
  EXPECT_EQ(invoke({"frobnicate"}), 3);
}

TEST(Cli, ValidateAndTamper) {
  const auto out = scratch("validate");
  ASSERT_EQ(invoke({"certify", "--scenario", "arm", "--out", out.string()}), 0);
  ASSERT_EQ(invoke({"validate", "--scenario", "arm", "--random-count", "5", "--certificate", out.string(), "--out",
                    (out / "v").string()}),
            0);
  auto j = nlohmann::json::parse(slurp(out / "certificate_rise.json"));
  j["level"] = j["level"].get<double>() / 2;
  std::ofstream(out / "certificate_rise.json") << j.dump(2);
  std::string err;
  EXPECT_EQ(invoke({"validate", "--scenario", "arm", "--random-count", "5", "--certificate", out.string(), "--out",
                    (out / "v2").string()},
                   &err),
            5);
  EXPECT_FALSE(err.empty());
}

TEST(Cli, OutOfClassIsModelViolation) {
  std::string err;
  EXPECT_EQ(invoke({"validate", "--scenario", "arm", "--random-count", "2", "--delta-gain", "3", "--out",
                    scratch("gain").string()},
                   &err),
            5);
  EXPECT_NE(err.find("model-class violation"), std::string::npos);
}

TEST(Cli, DeterministicOutputs) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b}) {
    ASSERT_EQ(invoke({"simulate", "--scenario", "arm", "--seed", "4", "--out", d.string()}), 0);
    ASSERT_EQ(invoke({"certify", "--scenario", "arm", "--out", d.string()}), 0);
  }
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    ++compared;
  }
  EXPECT_GE(compared, 5);
}

TEST(Cli, ReportSummarizes) {
  const auto out = scratch("report");
  ASSERT_EQ(invoke({"certify", "--scenario", "arm", "--out", out.string()}), 0);
  ASSERT_EQ(invoke({"report", "--out", out.string()}), 0);
  EXPECT_TRUE(fs::exists(out / "report.md"));
}
