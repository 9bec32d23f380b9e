#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const auto tmp = std::filesystem::temp_directory_path() / "stbell_test_cli.out";
  const std::string cmd = std::string(STBELL_CLI_PATH) + " " + args + " > " + tmp.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string sample(const std::string& name) { return std::string(STBELL_SAMPLES_DIR) + "/" + name; }

}  // namespace

TEST(Cli, ChshCanonical) {
  const auto r = run("chsh");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("S,2.828427125"), std::string::npos) << r.out;
  EXPECT_NE(run("chsh --set g=0.5").out.find("S,1.414213562"), std::string::npos);
  EXPECT_NE(run("chsh --set g=0").out.find("S,0\n"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("chsh --config " + sample("bad_unknown_key.json")).code, 2);
  EXPECT_EQ(run("chsh --set gamma=1").code, 2);
  EXPECT_EQ(run("chsh --set g=2").code, 2);
  EXPECT_EQ(run("feasibility --config " + sample("feasibility_empty.json")).code, 2);
  EXPECT_EQ(run("qkd --config " + sample("qkd_tiny.json")).code, 4);
  EXPECT_EQ(run("chsh --format xml").code, 2);
  EXPECT_EQ(run("nosuchcommand").code, 2);
  EXPECT_EQ(run("gfactor --config " + sample("qkd_tiny.json")).code, 2);
  EXPECT_EQ(run("gfactor --set quadrature=true --set tol=1e-14 --set orders=[2,3]").code, 3);
}

TEST(Cli, GfactorReferenceSetup) {
  const auto r = run("gfactor --config " + sample("gfactor_reference.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("g,0.1012370"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("regime,undetectable"), std::string::npos);
  const auto big = run("gfactor --config " + sample("gfactor_large_regions.json"));
  EXPECT_NE(big.out.find("regime,violation_possible"), std::string::npos) << big.out;
}

TEST(Cli, FeasibilityAndQkdVerdicts) {
  const auto inf = run("feasibility --config " + sample("feasibility_canonical.json"));
  EXPECT_EQ(inf.code, 0);
  EXPECT_NE(inf.out.find("\"Infeasible\""), std::string::npos);
  EXPECT_NE(inf.out.find("\"certificate_verified\": true"), std::string::npos);
  const auto half = run("feasibility --config " + sample("feasibility_half.json"));
  EXPECT_NE(half.out.find("status,Feasible"), std::string::npos) << half.out;

  const auto q = run("qkd --config " + sample("qkd_quantum.json"));
  EXPECT_EQ(q.code, 0);
  EXPECT_NE(q.out.find("verdict,Secure"), std::string::npos) << q.out;
  const auto e = run("qkd --config " + sample("qkd_lhv.json"));
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.out.find("verdict,EveDetected"), std::string::npos) << e.out;
}

TEST(Cli, RoundLogAndOutFile) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto log = (dir / "stbell_rounds.csv").string();
  const auto out = (dir / "stbell_report.json").string();
  const auto r = run("qkd --set n_rounds=1000 --set channel.type=quantum --set channel.g=0.5 --set round_log=" + log +
                     " --format json --out " + out);
  EXPECT_TRUE(r.code == 0 || r.code == 4);
  std::ifstream in(log);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "round,a_idx,b_idx,detected,s_a,s_b");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 1000);
  EXPECT_TRUE(std::filesystem::exists(out));
}
