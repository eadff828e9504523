#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lamc_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int lamc(const std::string& args) const {
    const std::string cmd = std::string(LAMC_BIN) + " " + args + " > " + path("stdout.txt") +
                            " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
};

nlohmann::json without_timings(nlohmann::json j) {
  j.erase("wall_seconds");
  j.erase("worker_busy_seconds");
  for (auto& b : j["blocks"]) b.erase("seconds");
  return j;
}

}  // namespace

TEST_F(Cli, GenerateRunAndScore) {
  ASSERT_EQ(lamc("generate --rows 120 --cols 100 --cocluster 40x30 --cocluster 40x30 "
                 "--cocluster 40x40 --seed 5 --out " + path("a.mtx") + " --truth-out " + path("t.json")),
            0)
      << read("stderr.txt");
  ASSERT_EQ(lamc("run --input " + path("a.mtx") + " --k 3 --min-cocluster-rows 0.3 "
                 "--min-cocluster-cols 0.3 --workers 2 --seed 9 --truth " + path("t.json") +
                 " --out " + path("r1.json") + " --labels-out " + path("p.csv")),
            0)
      << read("stderr.txt");
  const auto report = nlohmann::json::parse(read("r1.json"));
  EXPECT_DOUBLE_EQ(report["metrics"]["nmi"]["row"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["metrics"]["nmi"]["col"].get<double>(), 1.0);

  ASSERT_EQ(lamc("metrics " + path("p.csv") + " " + path("t.json")), 0) << read("stderr.txt");
  const auto m = nlohmann::json::parse(read("stdout.txt"));
  EXPECT_DOUBLE_EQ(m["ari"]["row"].get<double>(), 1.0);

  // same configuration twice: identical apart from timings
  ASSERT_EQ(lamc("run --input " + path("a.mtx") + " --k 3 --min-cocluster-rows 0.3 "
                 "--min-cocluster-cols 0.3 --workers 2 --seed 9 --truth " + path("t.json") +
                 " --out " + path("r2.json")),
            0);
  EXPECT_EQ(without_timings(report), without_timings(nlohmann::json::parse(read("r2.json"))));
}

TEST_F(Cli, PlanPrintsJson) {
  ASSERT_EQ(lamc("plan --rows 1000 --cols 1000 --min-cocluster-rows 0.2 --min-cocluster-cols 0.2 "
                 "--tm 10 --tn 10 --p-thresh 0.95 --workers 4"),
            0)
      << read("stderr.txt");
  const auto plan = nlohmann::json::parse(read("stdout.txt"));
  EXPECT_GE(plan["success_bound"].get<double>(), 0.95);
  EXPECT_EQ(plan["perm_seeds"].size(), plan["rounds"].get<std::size_t>());
}

TEST_F(Cli, ExitCodes) {
  // inadmissible prior
  EXPECT_EQ(lamc("plan --rows 100 --cols 100 --min-cocluster-rows 0.05 --tm 10"), 2);
  EXPECT_NE(read("stderr.txt").find("no admissible grid"), std::string::npos);
  // bad configuration
  EXPECT_EQ(lamc("plan --rows 100 --cols 100 --p-thresh 1.5"), 2);
  EXPECT_EQ(lamc("run --input x.mtx --grid 2by2"), 2);
  EXPECT_EQ(lamc("run"), 2);
  // missing or malformed input
  EXPECT_EQ(lamc("run --input " + path("missing.mtx") + " --k 2"), 3);
  std::ofstream(path("bad.mtx")) << "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n";
  EXPECT_EQ(lamc("run --input " + path("bad.mtx") + " --k 2"), 3);
  EXPECT_EQ(lamc("metrics " + path("missing.csv") + " " + path("missing.csv")), 3);
}

TEST_F(Cli, BenchSweep) {
  ASSERT_EQ(lamc("generate --rows 160 --cols 120 --cocluster 40x30 --cocluster 40x30 --signal 0.9 "
                 "--noise 0.02 --seed 2 --out " + path("b.mtx")),
            0);
  ASSERT_EQ(lamc("bench --input " + path("b.mtx") + " --k 3 --min-cocluster-rows 0.25 "
                 "--min-cocluster-cols 0.25 --rounds 1 --sweep grid=1x1,2x2 --repetitions 1 --out " +
                 path("bench.json")),
            0)
      << read("stderr.txt");
  const auto table = nlohmann::json::parse(read("bench.json"));
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[1]["speedup"].get<double>(), 1.0);
  EXPECT_NE(read("stdout.txt").find("label,workers,m,n,rounds,median_seconds,speedup"), std::string::npos);
}
