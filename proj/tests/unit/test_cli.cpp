#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "shoulderscope_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with `args`, stdout to `out` (under scratch); returns the exit status.
int run(const std::string& args, const std::string& out = "stdout.txt",
        const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" SHOULDERSCOPE_CLI_PATH "\" " +
                          args + " > \"" + (scratch() / out).string() + "\" 2> \"" +
                          (scratch() / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path(const std::string& name) { return "\"" + (scratch() / name).string() + "\""; }

}  // namespace

TEST(Cli, SynthIsDeterministic) {
  ASSERT_EQ(run("synth --pin 2580 --seed 3 --out " + path("a")), 0);
  ASSERT_EQ(run("synth --pin 2580 --seed 3 --out " + path("b")), 0);
  EXPECT_NE(slurp(scratch() / "stdout.txt").find("frames"), std::string::npos);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(scratch() / "a")) {
    const auto other = scratch() / "b" / e.path().filename();
    ASSERT_TRUE(fs::exists(other));
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path();
    ++n;
  }
  EXPECT_GT(n, 10u);
  const auto gt = nlohmann::json::parse(slurp(scratch() / "a" / "ground_truth.json"));
  EXPECT_EQ(gt.at("taps").size(), 4u);
}

TEST(Cli, SynthRejectsUnknownLabel) {
  EXPECT_EQ(run("synth --pin 258X --out " + path("bad")), 2);
  EXPECT_EQ(run("synth --bogus 1 --out " + path("bad")), 2);
  EXPECT_EQ(run("synth --pin 1"), 2);
}

TEST(Cli, RecognizeSyntheticVideo) {
  ASSERT_EQ(run("synth --pin 1397 --seed 4 --out " + path("rec")), 0);
  const std::string frames = path("rec");
  ASSERT_EQ(run("recognize --frames " + frames + " --truth " + path("rec/ground_truth.json") +
                " --out " + path("rec.json") + " --annotate " + path("rec.pgm")),
            0);
  const auto r = nlohmann::json::parse(slurp(scratch() / "rec.json"));
  EXPECT_EQ(r.at("code"), nlohmann::json({"1", "3", "9", "7"}));
  EXPECT_TRUE(fs::exists(scratch() / "rec.pgm"));

  ASSERT_EQ(run("recognize --frames " + frames + " --expected-taps 2", "two.json"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(scratch() / "two.json")).at("touching_frames").size(), 2u);
}

TEST(Cli, RecognizeExitCodes) {
  EXPECT_EQ(run("recognize --frames " + path("does_not_exist")), 3);
  fs::create_directories(scratch() / "empty");
  EXPECT_EQ(run("recognize --frames " + path("empty")), 4);
  EXPECT_NE(slurp(scratch() / "stderr.txt").find("load"), std::string::npos);
  EXPECT_EQ(run("recognize"), 2);
}

TEST(Cli, PekModes) {
  ASSERT_EQ(run("pek --mode shuffled --seed 7", "p1.json"), 0);
  ASSERT_EQ(run("pek --mode shuffled --seed 7", "p2.json"), 0);
  EXPECT_EQ(slurp(scratch() / "p1.json"), slurp(scratch() / "p2.json"));
  ASSERT_EQ(run("pek --mode brownian --steps 100 --seed 2", "walk.json"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(scratch() / "walk.json")).size(), 100u);
  EXPECT_EQ(run("pek --mode froth"), 2);
  EXPECT_EQ(run("pek --layout nowhere-digits"), 2);
  ASSERT_EQ(run("pek --check-uniformity 2000 --seed 1", "chi.txt"), 0);
  EXPECT_NE(slurp(scratch() / "chi.txt").find("dof=81"), std::string::npos);
}

TEST(Cli, SeedFromEnvironment) {
  ASSERT_EQ(run("pek --mode shuffled", "env1.json", "SHOULDERSCOPE_SEED=11"), 0);
  ASSERT_EQ(run("pek --mode shuffled --seed 11", "env2.json"), 0);
  ASSERT_EQ(run("pek --mode shuffled --seed 12", "env3.json"), 0);
  EXPECT_EQ(slurp(scratch() / "env1.json"), slurp(scratch() / "env2.json"));
  EXPECT_NE(slurp(scratch() / "env1.json"), slurp(scratch() / "env3.json"));
}

TEST(Cli, ConfigEchoRoundTrips) {
  ASSERT_EQ(run("pek --mode brownian --steps 5 --sigma 1.5 --echo-config", "cfg.json"), 0);
  const std::string first = slurp(scratch() / "cfg.json");
  const auto j = nlohmann::json::parse(first);
  EXPECT_EQ(j.at("pek").at("mode"), "brownian");
  ASSERT_EQ(run("--config " + path("cfg.json") + " pek --echo-config", "cfg2.json"), 0);
  EXPECT_EQ(slurp(scratch() / "cfg2.json"), first);

  std::ofstream(scratch() / "extra.json") << R"({"pek":{"nonsense":1}})";
  EXPECT_EQ(run("--config " + path("extra.json") + " pek"), 2);
}

TEST(Cli, EvalBatch) {
  ASSERT_EQ(run("synth --count 2 --camera front,left-front --seed 5 --out " + path("batch")), 0);
  ASSERT_EQ(run("eval --manifest " + path("batch/manifest.json") + " --csv " + path("eval.csv"),
                "eval.txt"),
            0);
  const std::string out = slurp(scratch() / "eval.txt");
  EXPECT_NE(out.find("overall: n=4"), std::string::npos) << out;
  EXPECT_NE(out.find("group front"), std::string::npos);
  const std::string csv = slurp(scratch() / "eval.csv");
  EXPECT_EQ(csv.rfind("frames,group,truth", 0), 0u);
  EXPECT_EQ(run("eval --manifest " + path("missing/manifest.json")), 3);
}
