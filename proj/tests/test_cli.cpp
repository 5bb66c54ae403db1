#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "geoscore/interchange_io.hpp"
#include "geoscore/reports.hpp"

using namespace geoscore;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public testing::Test {
 protected:
  void SetUp() override {
    const auto* info = testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("geoscore_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult cli(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd =
        std::string("\"") + GEOSCORE_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = fs::exists(out) ? io::read_file(out) : "";
    r.err = fs::exists(err) ? io::read_file(err) : "";
    return r;
  }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ScoreCleanScene) {
  ASSERT_EQ(cli("synth --traj orbit --seed 3 --out " + path("scene")).code, 0);
  const auto r = cli("score " + path("scene") + " --jobs 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_LE(report["e_recon"].get<double>(), 0.05);
  EXPECT_EQ(report["t_used"], 10);
  EXPECT_NE(r.err.find("frames/s"), std::string::npos);
  EXPECT_EQ(cli("score " + path("scene")).out, r.out);
}

TEST_F(CliTest, ScoreErrors) {
  const auto missing = cli("score " + path("absent"));
  EXPECT_EQ(missing.code, 3);
  EXPECT_NE(missing.err.find("absent"), std::string::npos);
  ASSERT_EQ(cli("synth --traj dolly --frames 4 --out " + path("scene")).code, 0);
  EXPECT_EQ(cli("score " + path("scene") + " --frames 1").code, 2);
  EXPECT_EQ(cli("score " + path("scene") + " --frames 5").code, 4);
  EXPECT_EQ(cli("score " + path("scene") + " --perceptual lpips").code, 2);
  EXPECT_EQ(cli("score " + path("scene") + " --perceptual external:" + path("none.tsv")).code, 3);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST_F(CliTest, ExternalPerceptualTable) {
  ASSERT_EQ(cli("synth --traj lateral --frames 3 --out " + path("scene")).code, 0);
  io::write_file(path("lpips.tsv"), "0\t0.5\n1\t0.5\n2\t0.5\n");
  const auto r = cli("score " + path("scene") + " --frames 3 --perceptual external:" + path("lpips.tsv"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& f : nlohmann::json::parse(r.out)["per_frame"]) EXPECT_EQ(f["perceptual"], 0.5);
  io::write_file(path("short.tsv"), "0\t0.5\n");
  EXPECT_EQ(cli("score " + path("scene") + " --frames 3 --perceptual external:" + path("short.tsv")).code, 4);
}

TEST_F(CliTest, SynthWithCorruptionValidates) {
  const auto r = cli("synth --traj dolly --corrupt depth_noise:0.05 --seed 2 --out " + path("noisy"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NO_THROW(io::read_scene(path("noisy")));
  EXPECT_EQ(cli("synth --traj spiral --out " + path("x")).code, 2);
  EXPECT_EQ(cli("synth --corrupt blur:1 --out " + path("x")).code, 2);
  EXPECT_EQ(cli("synth --corrupt depth_noise:abc --out " + path("x")).code, 2);
}

TEST_F(CliTest, PromptsDeterministic) {
  const auto a = cli("prompts --n 5 --seed 7");
  const auto b = cli("prompts --n 5 --seed 7");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  std::istringstream lines(a.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["text"].get<std::string>().rfind(std::string(kStaticScenePrefix), 0), 0u);
    ++n;
  }
  EXPECT_EQ(n, 5);
  EXPECT_EQ(cli("prompts --n 0").code, 2);
}

TEST_F(CliTest, PairsFromManifest) {
  ASSERT_EQ(cli("synth --traj orbit --seed 1 --frames 6 --out " + path("good")).code, 0);
  ASSERT_EQ(cli("synth --traj orbit --seed 1 --frames 6 --corrupt pose_jitter:1 --out " + path("bad")).code, 0);
  io::write_file(path("groups.json"), R"({"groups": [
    {"context_id": "scored", "candidates": [{"seed": 0, "e_recon": 0.1, "alpha": 1.0}, {"seed": 1, "e_recon": 0.3, "alpha": 1.0}]},
    {"context_id": "fromdisk", "candidates": [{"seed": 0, "scene_ref": "good"}, {"seed": 1, "scene_ref": "bad"}]},
    {"context_id": "still", "candidates": [{"seed": 0, "e_recon": 0.1, "alpha": 0.0}, {"seed": 1, "e_recon": 0.3, "alpha": 0.0}]}]})");
  const auto r = cli("pairs --groups " + path("groups.json") + " --frames 6 --jobs 2 --out " + path("out/pairs.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string pairs = io::read_file(path("out/pairs.jsonl"));
  const auto drops = io::parse_json_file(path("out/pairs.drops.json"));
  EXPECT_EQ(drops["groups_total"], 3);
  EXPECT_EQ(drops["drops"]["static_motion"], 1);
  std::istringstream lines(pairs);
  std::string first;
  std::getline(lines, first);
  const auto p = nlohmann::json::parse(first);
  EXPECT_EQ(p["context_id"], "fromdisk");
  EXPECT_EQ(p["winner"], "good");
  EXPECT_EQ(p["loser"], "bad");
}

TEST_F(CliTest, PairsEdgeCases) {
  io::write_file(path("empty.json"), "");
  const auto empty = cli("pairs --groups " + path("empty.json"));
  EXPECT_EQ(empty.code, 0) << empty.err;
  EXPECT_EQ(empty.out, "");
  io::write_file(path("dup.json"), R"({"groups": [
    {"context_id": "a", "candidates": [{"seed": 0, "e_recon": 0.1, "alpha": 1.0}]},
    {"context_id": "a", "candidates": [{"seed": 1, "e_recon": 0.3, "alpha": 1.0}]}]})");
  EXPECT_EQ(cli("pairs --groups " + path("dup.json")).code, 2);
  io::write_file(path("broken.json"), "{\"groups\": [");
  EXPECT_EQ(cli("pairs --groups " + path("broken.json")).code, 2);
  EXPECT_EQ(cli("pairs --groups " + path("absent.json")).code, 3);
}

TEST_F(CliTest, EpipolarReport) {
  ASSERT_EQ(cli("synth --traj orbit --seed 4 --frames 4 --out " + path("scene")).code, 0);
  const auto r = cli("epipolar " + path("scene") + " --frames 4");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["pairs"].size(), 3u);
}

TEST_F(CliTest, DpoDemo) {
  const auto r = cli("dpo-demo --out " + path("trace.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("final mean margin ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_GT(std::stod(r.out.substr(pos + 18)), 0.0);
  EXPECT_EQ(io::parse_json_file(path("trace.json"))["steps"].size(), 501u);
  EXPECT_EQ(cli("dpo-demo --lr 1e6").code, 5);
  EXPECT_EQ(cli("dpo-demo --lr -1").code, 2);
}
