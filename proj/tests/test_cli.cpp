#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#ifndef SDAE_CLI_PATH
#define SDAE_CLI_PATH "sdae"
#endif
#ifndef SDAE_PROBLEMS_DIR
#define SDAE_PROBLEMS_DIR "problems"
#endif

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int status = -1;
  std::string out;  // stdout and stderr interleaved
};

CliResult run(const std::string& args) {
  const std::string cmd = std::string("\"") + SDAE_CLI_PATH + "\" " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("sdae-cli-test-" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> lines;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  return lines;
}

}  // namespace

TEST(Cli, VersionAndHelp) {
  EXPECT_EQ(run("--version").status, 0);
  const CliResult h = run("--help");
  EXPECT_EQ(h.status, 0);
  EXPECT_NE(h.out.find("simulate"), std::string::npos);
}

TEST(Cli, UnknownProblemListsBuiltins) {
  const CliResult r = run("check --problem no-such-problem");
  EXPECT_EQ(r.status, 1);
  for (const char* name : {"cubic-circuit", "pure-brownian", "linear-decay"})
    EXPECT_NE(r.out.find(name), std::string::npos) << r.out;
}

TEST(Cli, BadArgumentsExitOne) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("simulate").status, 1);
  EXPECT_EQ(run("simulate --problem cubic-circuit --bogus").status, 1);
  EXPECT_EQ(run("simulate --problem cubic-circuit --dt 0.1 --steps 5").status, 1);
  EXPECT_EQ(run("simulate --problem cubic-circuit --dt -1").status, 1);
  EXPECT_EQ(run("simulate --problem cubic-circuit --scheme milstein").status, 1);
  EXPECT_EQ(run("simulate --problem cubic-circuit --p 1").status, 1);
  EXPECT_EQ(run("convergence --problem cubic-circuit --levels 6,14 --reference 14").status, 1);
}

TEST(Cli, MalformedFileReportsLine) {
  TempDir dir;
  const fs::path bad = dir / "bad.sdae";
  std::ofstream(bad) << "n = 2\nm = 1\nf[1] = x1 +* 2\n";
  const CliResult r = run("check --problem \"" + bad.string() + "\"");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("3"), std::string::npos) << r.out;
}

TEST(Cli, CheckCircuitReportsConstants) {
  const CliResult r = run("check --problem cubic-circuit");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("index-1: OK"), std::string::npos);
  const auto k_at = r.out.find(", k = ");
  ASSERT_NE(k_at, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(k_at + 6)), 3.0);
  const auto n2_at = r.out.find("N^2 = ");
  ASSERT_NE(n2_at, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(n2_at + 6)), 2.0 + 1e-9);
}

TEST(Cli, CheckFailsOnSingularJacobian) {
  TempDir dir;
  const fs::path f = dir / "singular.sdae";
  std::ofstream(f) << "n = 2\nm = 1\na[2][1] = 1\nf[1] = x1\n";
  const CliResult r = run("check --problem \"" + f.string() + "\" --samples 64");
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("SINGULAR"), std::string::npos);
}

TEST(Cli, CheckProblemFile) {
  EXPECT_EQ(run("check --problem \"" SDAE_PROBLEMS_DIR "/rotating-kernel.sdae\" --samples 256").status, 0);
}

TEST(Cli, DecouplePrintsFamily) {
  const CliResult r = run("decouple --problem cubic-circuit --t 1 --u 2,5");
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* key : {"Q =", "P =", "R =", "A^- =", "D =", "drift = ", "diffusion ="})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  EXPECT_NE(r.out.find("u = (2, 0)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("X = (2, 0)"), std::string::npos) << r.out;
  EXPECT_EQ(run("decouple --problem cubic-circuit --t 2").status, 1);
  EXPECT_EQ(run("decouple --problem cubic-circuit --u 1,2,3").status, 1);
}

TEST(Cli, SimulateCsvLayout) {
  TempDir dir;
  const fs::path out = dir / "sim.csv";
  const CliResult r = run("simulate --problem cubic-circuit --t-end 0.5 --dt 0.05 --paths 64 --out \"" + out.string() + "\"");
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string csv = slurp(out);
  EXPECT_EQ(csv.rfind("# version: ", 0), 0u);
  EXPECT_NE(csv.find("# seed: 42"), std::string::npos);
  EXPECT_NE(csv.find("# scheme: tamed-euler"), std::string::npos);
  const auto lines = data_lines(csv);
  ASSERT_EQ(lines.size(), 12u);
  EXPECT_EQ(lines[0], "t,mean_norm_p2,stderr_p2,sup_estimate,divergent");
  EXPECT_EQ(lines[1].rfind("0,1,0,1,0", 0), 0u) << lines[1];
  EXPECT_EQ(lines.back().rfind("0.5,", 0), 0u) << lines.back();
}

TEST(Cli, SimulateSeveralOrdersAndSteps) {
  const CliResult r = run("simulate --problem linear-decay --steps 4 --paths 8 --p 2 --p 3 --scheme euler");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto lines = data_lines(r.out);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "t,mean_norm_p2,stderr_p2,mean_norm_p3,stderr_p3,sup_estimate,divergent");
  // Deterministic problem: X(1) = 0.75^4, so the moments are 0.75^8 and 0.75^12.
  EXPECT_EQ(lines[5], "1,0.1001129150390625,0,0.031676352024078369,0,1,0");
}

TEST(Cli, SimulateByteIdenticalAcrossRunsAndThreads) {
  TempDir dir;
  const std::string base = "simulate --problem cubic-circuit --dt 0.01 --paths 200 --seed 7 --out ";
  ASSERT_EQ(run(base + "\"" + (dir / "a.csv").string() + "\" --threads 1").status, 0);
  ASSERT_EQ(run(base + "\"" + (dir / "b.csv").string() + "\" --threads 3").status, 0);
  ASSERT_EQ(run(base + "\"" + (dir / "c.csv").string() + "\" --threads 1").status, 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(Cli, SimulateWarnsAboveSupMomentOrder) {
  const CliResult r = run("simulate --problem cubic-circuit --dt 0.1 --paths 4 --p 5 --d 2");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("warning"), std::string::npos) << r.out;
}

TEST(Cli, SimulateDivergenceExitsTwo) {
  TempDir dir;
  const fs::path f = dir / "blowup.sdae";
  std::ofstream(f) << "n = 1\nm = 1\na[1][1] = 1\nf[1] = x1^3\nx0 = 2\n";
  const CliResult r = run("simulate --problem \"" + f.string() + "\" --dt 0.1 --paths 10 --scheme euler");
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("diverged"), std::string::npos) << r.out;
}

TEST(Cli, ConvergenceTable) {
  const CliResult r = run("convergence --problem linear-decay --levels 3,4,5 --reference 9 --paths 2 --scheme euler");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("# fitted_order: "), std::string::npos);
  const auto lines = data_lines(r.out);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "level,dt,rms_error");
  EXPECT_EQ(lines[1].rfind("3,0.125,", 0), 0u);
}
