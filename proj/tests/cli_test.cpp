#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "../tools/run_config.hpp"

namespace {

struct Invocation {
  int code = -1;
  std::string out;
};

Invocation run(const std::string& args) {
  const std::string cmd = std::string(PBFTPERF_PATH) + " " + args + " 2>/dev/null";
  Invocation r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> out;
  std::string f;
  std::istringstream is(row);
  while (std::getline(is, f, ',')) out.push_back(f);
  if (!row.empty() && row.back() == ',') out.emplace_back();
  return out;
}

std::string temp_path(const std::string& name) { return ::testing::TempDir() + "pbftperf_" + name; }

const std::string kBase = "--mu 2 --theta 2 --gamma 10 --beta 2 --p 0.5 --L 1 --N 2";

TEST(Cli, VotingRow) {
  const Invocation r = run("voting " + kBase);
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "mu,theta,gamma,beta,p,L,N,zeta1,zeta2,A,B,C,r1,r2");
  const auto f = fields(ls[1]);
  ASSERT_EQ(f.size(), 14u);
  EXPECT_NEAR(std::stod(f[12]), 2.0 * std::stod(f[7]), 1e-13);
  EXPECT_NEAR(std::stod(f[13]), 2.0 * std::stod(f[8]), 1e-13);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("voting --mu 2 --gamma 10 --beta 2 --p 0.5 --L 1 --N 2").code, 2);
  EXPECT_EQ(run("voting " + kBase + " --p 1.2").code, 2);
  EXPECT_EQ(run("voting " + kBase + " --L x").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("voting --no-such-flag 1").code, 2);
  EXPECT_EQ(run("sweep " + kBase).code, 2);
  EXPECT_EQ(run("sweep " + kBase + " --sweep p=0.4:0.7:0").code, 2);
  EXPECT_EQ(run("sweep " + kBase + " --sweep p=0.4:0.7:0.1 --sweep gamma=5:10:5 --sweep beta=1:2:1").code, 2);
  EXPECT_EQ(run("simulate " + kBase + " --horizon 10 --warmup 10").code, 2);
  EXPECT_EQ(run("voting " + kBase + " --N 40 --cap 1000").code, 2);
}

TEST(Cli, ValidationMessageNamesTheField) {
  const std::string cmd = std::string(PBFTPERF_PATH) + " voting " + kBase + " --p 1.2 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[512] = {};
  const std::size_t n = std::fread(buf, 1, sizeof buf - 1, pipe);
  pclose(pipe);
  EXPECT_NE(std::string(buf, n).find("p must"), std::string::npos);
}

TEST(Cli, QueueStableAndUnstable) {
  const Invocation ok = run("queue --lambda 1 --b 50 --r1 0.7 --r2 0.1");
  ASSERT_EQ(ok.code, 0);
  const auto ls = lines(ok.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "lambda,b,r1,r2,stable,iterations,eta1,eta2,Re1,Re2,TH");
  const auto f = fields(ls[1]);
  ASSERT_EQ(f.size(), 11u);
  EXPECT_EQ(f[4], "1");
  EXPECT_GT(std::stoi(f[5]), 0);
  EXPECT_NEAR(std::stod(f[10]), 50 * std::stod(f[8]), 1e-9);
  EXPECT_NEAR(std::stod(f[10]), 6.0, 1e-8);

  const Invocation bad = run("queue --lambda 1 --b 10 --r1 0.1 --r2 0.1");
  EXPECT_EQ(bad.code, 3);
  const auto bl = lines(bad.out);
  ASSERT_EQ(bl.size(), 2u);
  EXPECT_EQ(bl[1], "1,10,0.1,0.1,0,0,,,,,");
}

TEST(Cli, QueueFromVotingModel) {
  const Invocation r = run("queue " + kBase + " --p 0.7 --lambda 0.05 --b 5");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0].rfind("mu,theta,gamma,beta,p,L,N,zeta1,zeta2,A,B,C,lambda,b,r1,r2,stable", 0), 0u);
  const auto f = fields(ls[1]);
  EXPECT_NEAR(std::stod(f[14]), 2.0 * std::stod(f[7]), 1e-13);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const std::string cfg = temp_path("base.cfg");
  {
    std::ofstream f(cfg);
    f << "# reference point\nmu = 2\ntheta=2\ngamma = 10\nbeta = 2\np = 0.7   # overridden below\nL = 1\nN = 2\n";
  }
  const Invocation from_flags = run("voting " + kBase);
  const Invocation from_file = run("voting --config " + cfg + " --p 0.5");
  ASSERT_EQ(from_file.code, 0);
  EXPECT_EQ(from_file.out, from_flags.out);

  const std::string bad = temp_path("bad.cfg");
  {
    std::ofstream f(bad);
    f << "mu = 2\nrho = 3\n";
  }
  EXPECT_EQ(run("voting --config " + bad).code, 2);
  EXPECT_EQ(run("voting --config " + temp_path("missing.cfg")).code, 2);
}

TEST(Cli, OutputFileAndDumps) {
  const std::string out = temp_path("v.csv"), pi = temp_path("pi.csv"), q = temp_path("q.txt");
  const Invocation r = run("voting " + kBase + " --out " + out + " --dump-pi " + pi + " --dump-q " + q);
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream fo(out), fp(pi), fq(q);
  std::string line;
  std::getline(fo, line);
  EXPECT_EQ(line, "mu,theta,gamma,beta,p,L,N,zeta1,zeta2,A,B,C,r1,r2");
  std::getline(fp, line);
  EXPECT_EQ(line, "n,m,k,class,pi");
  int rows = 0;
  while (std::getline(fp, line)) ++rows;
  EXPECT_EQ(rows, 158);
  std::getline(fq, line);
  EXPECT_EQ(line.rfind("# rows=158 cols=158 nnz=", 0), 0u);
}

TEST(Cli, VotingSweepIsOrderedAndMonotone) {
  const Invocation r = run("sweep " + kBase + " --sweep p=0.4:0.7:0.05");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 8u);
  double prev_p = 0.0, prev_z = -1.0;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = fields(ls[i]);
    EXPECT_GT(std::stod(f[4]), prev_p);
    EXPECT_GE(std::stod(f[7]), prev_z);
    prev_p = std::stod(f[4]);
    prev_z = std::stod(f[7]);
  }
  EXPECT_EQ(fields(ls.back())[4], "0.7");
}

TEST(Cli, TwoAxisQueueSweepFlagsUnstablePoints) {
  const Invocation r = run("sweep --lambda 1 --r1 0.7 --r2 0.1 --sweep lambda=1,20 --sweep b=5:15:5");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 7u);
  // Row-major grid: lambda varies slowest.
  EXPECT_EQ(ls[1].rfind("1,5,", 0), 0u);
  EXPECT_EQ(ls[3].rfind("1,15,", 0), 0u);
  EXPECT_EQ(ls[4].rfind("20,5,", 0), 0u);
  // 20 + 0.1 b < 0.7 b needs b > 33.3.
  for (std::size_t i = 4; i < 7; ++i) EXPECT_EQ(fields(ls[i])[4], "0") << ls[i];
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(fields(ls[i])[4], "1") << ls[i];
}

TEST(Cli, SweepIndependentOfThreads) {
  const std::string args = "sweep " + kBase + " --sweep p=0.4:0.7:0.1 --sweep gamma=5,10";
  const Invocation one = run(args + " --threads 1");
  const Invocation four = run(args + " --threads 4");
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(one.out, four.out);
}

TEST(Cli, SimulateIsDeterministic) {
  const std::string args = "simulate " + kBase + " --N 1 --seed 7 --horizon 2000 --reps 4";
  const Invocation a = run(args), b = run(args + " --threads 3");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto ls = lines(a.out);
  EXPECT_EQ(ls[0], "scope,replication,quantity,estimate,std_error,analytic,delta,diverged");
  const auto z = fields(ls[1]);
  ASSERT_EQ(z.size(), 8u);
  EXPECT_EQ(z[2], "zeta1");
  EXPECT_NEAR(std::stod(z[6]), std::abs(std::stod(z[3]) - std::stod(z[5])), 1e-14);
  EXPECT_EQ(ls.size(), 1u + 6u + 4u * 6u);
  EXPECT_NE(run("simulate " + kBase + " --N 1 --seed 8 --horizon 2000 --reps 4").out, a.out);
}

TEST(Cli, SimulateFlagsDivergence) {
  const Invocation r = run("simulate --lambda 1 --b 10 --r1 0.1 --r2 0.1 --horizon 5000 --reps 2 --runaway 500");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  const auto th = fields(ls[3]);
  EXPECT_EQ(th[2], "TH");
  EXPECT_EQ(th[5], "");  // no analytic value for an unstable point
  EXPECT_EQ(th[7], "1");

  const Invocation ok = run("simulate --lambda 1 --b 5 --r1 0.7 --r2 0.1 --horizon 5000 --reps 2");
  ASSERT_EQ(ok.code, 0);
  EXPECT_EQ(fields(lines(ok.out)[3])[7], "0");
  EXPECT_NEAR(std::stod(fields(lines(ok.out)[3])[5]), 1.5, 1e-8);
}

TEST(RunConfigParsing, SweepGrids) {
  const auto a = pbftperf::parse_sweep("p=0.4:0.7:0.05");
  ASSERT_EQ(a.values.size(), 7u);
  EXPECT_EQ(a.values.front(), "0.4");
  EXPECT_EQ(a.values[1], "0.45");
  EXPECT_EQ(a.values.back(), "0.7");
  const auto b = pbftperf::parse_sweep("mu = 1.85, 2, 2.5");
  EXPECT_EQ(b.name, "mu");
  EXPECT_EQ(b.values, (std::vector<std::string>{"1.85", "2", "2.5"}));
  EXPECT_THROW(pbftperf::parse_sweep("seed=1:2:1"), pbft::domain_error);
  EXPECT_THROW(pbftperf::parse_sweep("p=0.7:0.4:0.1"), pbft::domain_error);
  EXPECT_THROW(pbftperf::parse_sweep("p=0.4:0.7"), pbft::domain_error);
  EXPECT_THROW(pbftperf::parse_sweep("p=0.4:inf:0.1"), pbft::domain_error);
}

TEST(RunConfigParsing, TypedAccess) {
  pbftperf::RunConfig c;
  c.set("b", "150.0");
  c.set("L", "1.5");
  c.set("lambda", "abc");
  EXPECT_EQ(c.batch(), 150);
  EXPECT_THROW(c.small_int("L"), pbft::domain_error);
  EXPECT_THROW(c.lambda(), pbft::domain_error);
  EXPECT_THROW(c.real("theta"), pbft::domain_error);
  EXPECT_EQ(c.rate_options().epsilon, 1e-12);
  EXPECT_EQ(c.rate_options().max_iter, 1'000'000u);
}

}  // namespace
