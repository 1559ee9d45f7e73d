// Drives the natlog executable end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs `args` through the shell; stderr is folded into `out` when `merge`.
Result run(const std::string& args, bool merge = false, const std::string& input = "") {
  std::string cmd = std::string("'") + NATLOG_CLI + "' " + args;
  if (!input.empty()) {
    auto in = (std::filesystem::temp_directory_path() / "natlog_cli_input.txt").string();
    std::ofstream(in) << input;
    cmd += " < '" + in + "'";
  }
  cmd += merge ? " 2>&1" : " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string prog(const std::string& f) { return std::string("'") + NATLOG_PROGRAMS_DIR + "/" + f + "'"; }

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + 1)) ++n;
  return n;
}

}  // namespace

TEST(Cli, RunPrintsBannerAndAnswers) {
  auto r = run("run " + prog("tc.nat") + " 'tc Who is animal ?'");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("GOAL PARSED: (('tc', 0, 'is', 'animal'),)\n", 0), 0u);
  EXPECT_EQ(count(r.out, "ANSWER: "), 8u);
  EXPECT_NE(r.out.find("ANSWER: ('tc', 'cat', 'is', 'animal')\n"), std::string::npos);
  EXPECT_NE(r.out.find("ANSWER: ('tc', 'reptile', 'is', 'animal')\n"), std::string::npos);
}

TEST(Cli, OutputIsDeterministic) {
  auto a = run("run " + prog("perm.nat") + " 'perm (a (b (c ()))) P ?'");
  auto b = run("run " + prog("perm.nat") + " 'perm (a (b (c ()))) P ?'");
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(count(a.out, "ANSWER: "), 6u);
}

TEST(Cli, MaxAnswersBoundsInfiniteStreams) {
  auto r = run("run " + prog("worm.nat") + " 'worm ?' --max-answers 43");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(count(r.out, "ANSWER: ('o',)"), 43u);
}

TEST(Cli, TimingUsesMilliseconds) {
  auto r = run("run " + prog("tc.nat") + " 'tc Who is animal ?' --timing");
  auto at = r.out.find("TIME: ");
  ASSERT_NE(at, std::string::npos);
  auto line = r.out.substr(at, r.out.find('\n', at) - at);
  auto dot = line.find('.');
  ASSERT_NE(dot, std::string::npos);
  EXPECT_EQ(line.substr(dot + 4), " seconds");
}

TEST(Cli, DatabaseWithEachIndexer) {
  for (std::string ix : {"const", "path"}) {
    auto r = run("run " + prog("elements.nat") + " --db " + prog("elements.tsv") + " --indexer " + ix +
                 " --skeleton 'gases Num Element ?'");
    EXPECT_EQ(r.code, 0) << ix;
    EXPECT_EQ(count(r.out, "ANSWER: "), 11u) << ix;
    EXPECT_NE(r.out.find("ANSWER: ('gases', '1', 'H')"), std::string::npos);
    EXPECT_NE(r.out.find("ANSWER: ('gases', '86', 'Rn')"), std::string::npos);
  }
}

TEST(Cli, NeuralIndexerSavesAndLoadsModels) {
  auto model = (std::filesystem::temp_directory_path() / "natlog_cli_model.txt").string();
  auto a = run("run " + prog("elements.nat") + " --db " + prog("elements.tsv") +
               " --indexer neural --save-model '" + model + "' 'gases Num Element ?'");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(count(a.out, "ANSWER: "), 11u);
  auto b = run("run " + prog("elements.nat") + " --db " + prog("elements.tsv") +
               " --indexer neural --load-model '" + model + "' 'gases Num Element ?'");
  EXPECT_EQ(b.code, 0);
  EXPECT_EQ(a.out, b.out);
  std::filesystem::remove(model);
}

TEST(Cli, ExitCodes) {
  auto missing = run("run missing.nat 'x ?'", true);
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.out.find("missing.nat"), std::string::npos);

  auto bad_query = run("run " + prog("tc.nat") + " 'tc (X ?'", true);
  EXPECT_EQ(bad_query.code, 1);
  EXPECT_NE(bad_query.out.find("error"), std::string::npos);

  auto runtime = run("run " + prog("tc.nat") + " '`nosuch 1 X ?'", true);
  EXPECT_EQ(runtime.code, 2);
  EXPECT_NE(runtime.out.find("nosuch"), std::string::npos);

  auto flags = run("run " + prog("tc.nat") + " 'x ?' --epochs 5");
  EXPECT_EQ(flags.code, 1);

  auto nodb = run("run " + prog("elements.nat") + " 'gases N E ?'");
  EXPECT_EQ(nodb.code, 2);
}

TEST(Cli, ParseErrorsCarryPositions) {
  auto f = (std::filesystem::temp_directory_path() / "natlog_bad.nat").string();
  std::ofstream(f) << "ok fact.\nbroken (fact.\n";
  auto r = run("run '" + f + "' 'ok X ?'", true);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("natlog_bad.nat:2:"), std::string::npos);
  std::filesystem::remove(f);
}

TEST(Cli, ReplKeepsGoingAfterErrors) {
  auto r = run("repl " + prog("perm.nat"), true, "perm (a ()) P?\nbroken (\n`nosuch X Y ?\nperm (a (b ())) P ?\nhalt.\nperm (a ()) P ?\n");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(count(r.out, "ANSWER: "), 3u);
  EXPECT_NE(r.out.find("ANSWER: ('perm', ('a', ()), ('a', ()))"), std::string::npos);
  EXPECT_EQ(count(r.out, "error"), 2u);
}

TEST(Cli, ReplWithoutProgramExitsOnHalt) {
  auto r = run("repl", false, "halt.\n");
  EXPECT_EQ(r.code, 0);
}

TEST(Cli, Benchmarks) {
  auto q = run("bench queens10");
  EXPECT_EQ(q.code, 0);
  EXPECT_EQ(q.out.rfind("queens10: 724 answers in ", 0), 0u);
  auto p = run("bench perm");
  EXPECT_EQ(p.out.rfind("perm: 720 answers in ", 0), 0u);
  auto t = run("bench tc");
  EXPECT_EQ(t.out.rfind("tc: 8 answers in ", 0), 0u);
}
