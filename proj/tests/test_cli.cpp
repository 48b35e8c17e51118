#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "eofair/data.hpp"
#include "eofair/oracle.hpp"

namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  const fs::path dir = fs::temp_directory_path() / "eofair_cli_test";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(EOFAIR_CLI_PATH) + " " + args + " > " +
                          (workdir() / "stdout.txt").string() + " 2> " +
                          (workdir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write(const std::string& name, const std::string& body) {
  const fs::path p = workdir() / name;
  std::ofstream(p) << body;
  return p.string();
}

std::string train_csv() {
  const fs::path p = workdir() / "train.csv";
  if (!fs::exists(p)) {
    const auto smp = eofair::sample(eofair::SyntheticDistribution::linear(0.5, 0.1, 0.8, 0.2, 0.7),
                                    600, 1);
    eofair::write_csv(smp.to_labeled(), p);
  }
  return p.string();
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("calibrate --help"), 0);
}

TEST(Cli, UnknownFlagIsConfigError) { EXPECT_EQ(run("calibrate --bogus 1"), 5); }

TEST(Cli, CalibrateEvaluatePredict) {
  const std::string model = (workdir() / "model.json").string();
  ASSERT_EQ(run("calibrate --train " + train_csv() + " --lambda 0.01 --out " + model), 0);
  EXPECT_NE(slurp(model).find("theta_hat"), std::string::npos);
  ASSERT_EQ(run("evaluate --model " + model + " --test " + train_csv() + " --json"), 0);
  EXPECT_NE(slurp(workdir() / "stdout.txt").find("deo"), std::string::npos);
  const std::string preds = (workdir() / "pred.csv").string();
  ASSERT_EQ(run("predict --model " + model + " --data " + train_csv() + " --out " + preds), 0);
  std::ifstream in(preds);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 601u);
}

TEST(Cli, ExitCodes) {
  const std::string nonbinary = write("nonbinary.csv", "x,S,Y\n0.1,2,0\n0.2,0,1\n");
  EXPECT_EQ(run("calibrate --train " + nonbinary), 2);
  const std::string onegroup = write("onegroup.csv", "x,S,Y\n0.1,1,0\n0.2,1,1\n");
  EXPECT_EQ(run("calibrate --train " + onegroup), 3);
  const std::string unl = write("thin.csv", "x,S\n0.1,1\n0.2,0\n0.3,0\n");
  EXPECT_EQ(run("calibrate --train " + train_csv() + " --unlabeled " + unl), 3);
  EXPECT_EQ(run("calibrate --train " + train_csv() + " --mode sideways"), 5);
  EXPECT_EQ(run("calibrate --train " + train_csv() + " --estimator knn --k 100000"), 5);
  EXPECT_EQ(run("calibrate --train /nonexistent.csv"), 2);
  const std::string bad_json = write("bad.json", "{ nope");
  EXPECT_EQ(run("consistency --dist " + bad_json), 2);
}

TEST(Cli, ConfigFileDefaultsAndOverrides) {
  const std::string cfg = write("cfg.json", "{\"train\": \"" + train_csv() +
                                                 "\", \"estimator\": \"knn\", \"k\": 7}");
  const std::string model = (workdir() / "model_cfg.json").string();
  ASSERT_EQ(run("calibrate --config " + cfg + " --k 9 --out " + model), 0);
  EXPECT_NE(slurp(model).find("\"k\": 9"), std::string::npos) << slurp(model);
}

TEST(Cli, ConsistencyCsv) {
  const std::string dist = write(
      "dist.json",
      R"({"pi_1": 0.5, "groups": [{"location": 0, "scale": 1, "knots": [[0, 0.1], [1, 0.9]]},)"
      R"( {"location": 0, "scale": 1, "knots": [[0, 0.2], [1, 0.9]]}]})");
  ASSERT_EQ(run("consistency --dist " + dist + " --n-grid 100 --N-grid 100,200 --repeats 2 --test-size 500"), 0);
  const std::string out = slurp(workdir() / "stdout.txt");
  EXPECT_EQ(out.rfind("n,N,repeats,", 0), 0u) << out;
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 3);
}
