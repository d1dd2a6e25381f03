#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Result cli(const std::string& args) {
  const std::string cmd = std::string(NPI_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int count_prefix(const std::string& text, const std::string& prefix) {
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) n += line.rfind(prefix, 0) == 0;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("npi_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenTracesCounts) {
  ASSERT_EQ(cli("gen-traces --task sort --min 2 --max 20 --count 64 -o " + path("s.txt")).code, 0);
  EXPECT_EQ(count_prefix(slurp(path("s.txt")), "trace "), 1216);
  ASSERT_EQ(cli("gen-traces --task add --min 1 --max 20 --count 32 -o " + path("a.txt")).code, 0);
  EXPECT_EQ(count_prefix(slurp(path("a.txt")), "trace "), 640);
  ASSERT_EQ(cli("gen-traces --task goto --min 1 --max 3 --count 0 -o " + path("e.txt")).code, 0);
  EXPECT_EQ(slurp(path("e.txt")), "# npi-traces v1\n");
}

TEST_F(Cli, GenTracesWithSequenceRecords) {
  ASSERT_EQ(cli("gen-traces --task add --min 1 --max 3 --count 2 --seq-format add-easy -o " + path("a.txt")).code, 0);
  const std::string text = slurp(path("a.txt"));
  EXPECT_EQ(count_prefix(text, "trace "), 6);
  EXPECT_EQ(count_prefix(text, "seq "), 6);
}

TEST_F(Cli, UsageErrorsAreNonzero) {
  const auto bad_range = cli("gen-traces --task sort --min 5 --max 2 -o " + path("x.txt"));
  EXPECT_NE(bad_range.code, 0);
  EXPECT_NE(bad_range.out.find("invalid range"), std::string::npos);
  EXPECT_EQ(bad_range.code, 2);
  EXPECT_EQ(cli("gen-traces --task juggle -o " + path("x.txt")).code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("eval --help").code, 0);
  const auto missing = cli("eval -c " + path("none.ckpt") + " --task sort");
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.out.find("cannot open checkpoint"), std::string::npos);
  EXPECT_NE(cli("experiment no-such-recipe -o " + path("out")).code, 0);
}

TEST_F(Cli, RunPrintsOracleTrees) {
  const auto sort = cli("run -c unused --task sort --instance 9,2,5 --oracle");
  ASSERT_EQ(sort.code, 0);
  EXPECT_EQ(sort.out.rfind("BUBBLESORT\n  BUBBLE\n    ACT PTR PTR2 RIGHT\n    BSTEP\n      COMPSWAP\n", 0), 0u);
  EXPECT_NE(sort.out.find("final: 2,5,9"), std::string::npos);
  const auto add = cli("run -c unused --task add --instance 96+125 --oracle");
  ASSERT_EQ(add.code, 0);
  EXPECT_EQ(add.out.rfind("ADD\n  ADD1\n    ACT WRITE OUT 1\n    CARRY\n", 0), 0u);
  const auto pose = cli("run -c unused --task goto --instance 0,1\\>0,1 --oracle");
  ASSERT_EQ(pose.code, 0);
  EXPECT_EQ(count_prefix(pose.out, "    ACT"), 0);
  EXPECT_NE(pose.out.find("HGOTO"), std::string::npos);
  EXPECT_NE(cli("run -c unused --task sort --instance 9,x --oracle").code, 0);
}

TEST_F(Cli, TrainEvalRunAndAddProgram) {
  ASSERT_EQ(cli("gen-traces --task sort --min 2 --max 3 --count 4 -o " + path("s.txt")).code, 0);
  std::ofstream(path("cfg.json")) << R"({"model":{"hidden":16,"state_dim":16,"mlp_hidden":16,"core_input":16,"program_dim":8},
                                         "train":{"batch_size":2,"reestimate_interval":10}})";
  const auto tr = cli("train --traces " + path("s.txt") + " --config " + path("cfg.json") + " --max-steps 20 --metrics " +
                      path("m.csv") + " -o " + path("m.ckpt"));
  ASSERT_EQ(tr.code, 0) << tr.out;
  EXPECT_EQ(count_prefix(slurp(path("m.csv")), "1,"), 2);

  const std::string eval = "eval -c " + path("m.ckpt") + " --task sort --sizes 2-4,6 --count 5 --step-budget 500";
  ASSERT_EQ(cli(eval + " -o " + path("e1.csv")).code, 0);
  ASSERT_EQ(cli(eval + " -o " + path("e2.csv")).code, 0);
  const std::string csv = slurp(path("e1.csv"));
  EXPECT_EQ(csv, slurp(path("e2.csv")));
  EXPECT_EQ(count_prefix(csv, "1,sort,"), 4);
  EXPECT_EQ(csv.rfind("schema,task,size,instances,accuracy,exact_match,mean_steps\n", 0), 0u);

  const auto run = cli("run -c " + path("m.ckpt") + " --task sort --instance 3,1,2 --step-budget 50");
  ASSERT_EQ(run.code, 0);
  EXPECT_NE(run.out.find("halt: "), std::string::npos);

  ASSERT_EQ(cli("gen-traces --task max --min 2 --max 3 --count 2 -o " + path("max.txt")).code, 0);
  const auto ap = cli("add-program -c " + path("m.ckpt") + " --names MAX RJMP --env sorting --traces " + path("max.txt") +
                      " --max-steps 10 -o " + path("m2.ckpt"));
  ASSERT_EQ(ap.code, 0) << ap.out;
  ASSERT_EQ(cli("eval -c " + path("m2.ckpt") + " --task max --sizes 3 --count 3 --step-budget 200").code, 0);
  // registering the same programs again fails cleanly
  EXPECT_NE(cli("add-program -c " + path("m2.ckpt") + " --names MAX --traces " + path("max.txt") + " -o " + path("m3.ckpt")).code, 0);
  // traces that use unregistered programs are rejected
  EXPECT_NE(cli("train --traces " + path("max.txt") + " --max-steps 1 -o " + path("m4.ckpt")).code, 0);
}

TEST_F(Cli, UntrainedModelEvaluatesNearZero) {
  ASSERT_EQ(cli("gen-traces --task add --min 1 --max 1 --count 1 -o " + path("a.txt")).code, 0);
  ASSERT_EQ(cli("train --traces " + path("a.txt") + " --max-steps 0 -o " + path("z.ckpt")).code, 0);
  const auto ev = cli("eval -c " + path("z.ckpt") + " --task add --sizes 5 --count 20 --step-budget 300");
  ASSERT_EQ(ev.code, 0);
  EXPECT_NE(ev.out.find("1,add,5,20,0,"), std::string::npos) << ev.out;
}

TEST_F(Cli, ExperimentIsDeterministicAndResumes) {
  std::ofstream(path("tiny.json")) << R"({"model":{"hidden":16,"state_dim":16,"mlp_hidden":16,"core_input":16,"program_dim":8},
    "train":{"max_steps":30,"reestimate_interval":10,"batch_size":2},
    "s2s":{"hidden":8,"embed_dim":4,"max_steps":30},
    "data":{"example_counts":[2,8]},"eval":{"count":4,"step_budget":400}})";
  const std::string cmd = "experiment sample-complexity -q --config " + path("tiny.json") + " --seed 3 -o ";
  const auto a = cli(cmd + path("a"));
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(cli(cmd + path("b")).code, 0);
  const std::string csv = slurp(path("a/sample-complexity/results.csv"));
  EXPECT_EQ(csv, slurp(path("b/sample-complexity/results.csv")));
  EXPECT_EQ(count_prefix(csv, "1,sample-complexity,3,"), 4);
  EXPECT_TRUE(fs::exists(path("a/sample-complexity/spec.json")));
  EXPECT_TRUE(fs::exists(path("a/sample-complexity/summary.txt")));
  // a rerun into the same directory reuses checkpoints and reproduces the CSV
  const auto again = cli("experiment sample-complexity --config " + path("tiny.json") + " --seed 3 -o " + path("a"));
  ASSERT_EQ(again.code, 0);
  EXPECT_NE(again.out.find("reusing"), std::string::npos);
  EXPECT_EQ(slurp(path("a/sample-complexity/results.csv")), csv);
}
