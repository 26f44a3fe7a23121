#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli() { return SACPDE_CLI_PATH; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sacpde_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run(const std::string& args) {
  const int status = std::system((cli() + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// reference FNV-1a 64, written out independently of the library
std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* kSmall = R"([plant]
elements = 20
[sac]
sampling = 0.01
substeps = 1
gamma = -12
[simulation]
duration = 0.1
)";

}  // namespace

TEST(Cli, SimulateWritesExpectedHeaders) {
  const fs::path dir = scratch("headers");
  write(dir / "s.ini", kSmall);
  ASSERT_EQ(run("simulate --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            0);
  EXPECT_EQ(first_line(dir / "out/error.csv"), "t,error");
  EXPECT_EQ(first_line(dir / "out/cost.csv"), "t,predicted_cost,alpha_d");
  EXPECT_EQ(first_line(dir / "out/control.csv"), "t,x,u");
  EXPECT_EQ(first_line(dir / "out/state.csv"), "t,x,y");
  EXPECT_EQ(first_line(dir / "out/timing.csv"), "t,compute_seconds");
  EXPECT_TRUE(fs::exists(dir / "out/plot.gp"));
}

TEST(Cli, ZeroInitialDataGivesZeroSeries) {
  const fs::path dir = scratch("zero");
  write(dir / "s.ini", std::string(kSmall) + "[output]\n" + "snapshot_stride = 1\n" +
                           "[disturbance]\nlevel = 0\n");
  std::string text = slurp(dir / "s.ini");
  text.replace(text.find("elements = 20"), 13, "elements = 20\ny0_amplitude = 0");
  write(dir / "s.ini", text);
  ASSERT_EQ(run("simulate --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            0);
  for (const char* file : {"error.csv", "control.csv", "state.csv"}) {
    std::ifstream in(dir / "out" / file);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      const double last = std::stod(line.substr(line.rfind(',') + 1));
      EXPECT_EQ(last, 0.0) << file << ": " << line;
      ++rows;
    }
    EXPECT_GT(rows, 0) << file;
  }
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  const fs::path dir = scratch("determinism");
  write(dir / "s.ini", std::string(kSmall) + "[disturbance]\nlevel = 0.1\nseed = 5\n");
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run("simulate --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                  (dir / out).string()),
              0);
  }
  for (const char* file : {"error.csv", "fine_error.csv", "cost.csv", "control.csv", "state.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / file), slurp(dir / "b" / file)) << file;
  }
}

TEST(Cli, SeedOverrideChangesDisturbance) {
  const fs::path dir = scratch("seed");
  write(dir / "s.ini", std::string(kSmall) + "[disturbance]\nlevel = 0.1\nseed = 5\n");
  const std::string base = "simulate --quiet --config " + (dir / "s.ini").string();
  ASSERT_EQ(run(base + " --output-dir " + (dir / "a").string()), 0);
  ASSERT_EQ(run(base + " --seed 6 --output-dir " + (dir / "b").string()), 0);
  EXPECT_NE(slurp(dir / "a/error.csv"), slurp(dir / "b/error.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "b/manifest.json"));
  EXPECT_EQ(manifest["seed"], 6);
}

TEST(Cli, ManifestHashesMatchFiles) {
  const fs::path dir = scratch("manifest");
  write(dir / "s.ini", kSmall);
  ASSERT_EQ(run("simulate --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "out/manifest.json"));
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_FALSE(manifest["partial"].get<bool>());
  ASSERT_FALSE(manifest["outputs"].empty());
  for (const auto& entry : manifest["outputs"]) {
    const std::string file = entry["file"];
    EXPECT_EQ(entry["fnv1a64"], fnv_hex(slurp(dir / "out" / file))) << file;
  }
}

TEST(Cli, BadConfigExitsWithTwo) {
  const fs::path dir = scratch("bad");
  write(dir / "s.ini", "[sac]\ngamma = 0.5\n");
  EXPECT_EQ(run("simulate --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            2);
  write(dir / "u.ini", "[plant]\nwidth = 2\n");
  EXPECT_EQ(run("simulate --config " + (dir / "u.ini").string() + " --output-dir " +
                (dir / "out2").string()),
            2);
  EXPECT_EQ(run("simulate --config /nonexistent.ini --output-dir " + (dir / "out3").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, AnalyzeRefusesSubdomainControl) {
  const fs::path dir = scratch("analyze");
  write(dir / "s.ini", "[control]\nsupport_a = 0.5\nsupport_b = 0.9\n");
  EXPECT_EQ(run("analyze --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            2);
  write(dir / "f.ini", "");
  ASSERT_EQ(run("analyze --config " + (dir / "f.ini").string() + " --output-dir " +
                (dir / "out2").string()),
            0);
  EXPECT_NE(slurp(dir / "out2/stability_report.txt").find("alpha"), std::string::npos);
}

TEST(Cli, SweepWritesSummaryInRequestedOrder) {
  const fs::path dir = scratch("sweep");
  write(dir / "s.ini", std::string(kSmall) + "[sweep]\nparameter = gamma\nvalues = -20, -12\n");
  ASSERT_EQ(run("sweep --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            0);
  std::ifstream in(dir / "out/sweep_summary.csv");
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "index,parameter,value,final_error,min_error,decay_rate,ok");
  EXPECT_EQ(row0.rfind("0,gamma,-20,", 0), 0u) << row0;
  EXPECT_EQ(row1.rfind("1,gamma,-12,", 0), 0u) << row1;
  EXPECT_TRUE(fs::exists(dir / "out/sweep_0_error.csv"));
}

TEST(Cli, CompareWritesAlignedSeries) {
  const fs::path dir = scratch("compare");
  write(dir / "s.ini", kSmall);
  ASSERT_EQ(run("compare --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            0);
  EXPECT_EQ(first_line(dir / "out/comparison.csv"), "t,sac_error,lqr_error");
  EXPECT_TRUE(fs::exists(dir / "out/comparison_summary.txt"));
}

TEST(Cli, GradientCheckAgreesWithFiniteDifferences) {
  const fs::path dir = scratch("gradient");
  write(dir / "s.ini", kSmall);
  ASSERT_EQ(run("gradient_check --quiet --config " + (dir / "s.ini").string() + " --output-dir " +
                (dir / "out").string()),
            0);
  EXPECT_EQ(first_line(dir / "out/gradient_check.csv"),
            "tau,analytic,finite_difference,relative_error");
}
