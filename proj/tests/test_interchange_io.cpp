#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>

#include "geoscore/interchange_io.hpp"
#include "geoscore/reports.hpp"
#include "geoscore/synthetic_oracle.hpp"

using namespace geoscore;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("geoscore_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t checksum(const SceneSequence& seq) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (float v : seq.frames[i].data()) {
      const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
      h = fnv1a(h, &byte, 1);
    }
    for (float d : seq.depths[i].data()) {
      const auto bits = std::bit_cast<std::uint32_t>(d);
      h = fnv1a(h, &bits, 4);
    }
  }
  return h;
}

SceneSequence small_scene(std::uint64_t seed = 4, oracle::Trajectory t = oracle::Trajectory::kOrbit) {
  return oracle::render_scene(oracle::make_room_scene(seed, t, 24, 16, 4));
}

template <typename F>
void expect_code(ErrorCode code, F&& f, const std::string& needle = "") {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
    if (!needle.empty()) { EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what(); }
  }
}

}  // namespace

TEST(SceneDirectory, RoundTripBitExact) {
  TempDir tmp;
  for (auto t : {oracle::Trajectory::kOrbit, oracle::Trajectory::kDolly, oracle::Trajectory::kLateral,
                 oracle::Trajectory::kStatic}) {
    const auto seq = small_scene(11, t);
    const fs::path dir = tmp.path() / std::string(oracle::to_string(t));
    io::write_scene(seq, dir);
    const auto back = io::read_scene(dir);
    EXPECT_TRUE(back == seq) << oracle::to_string(t);
  }
}

TEST(SceneDirectory, Layout) {
  TempDir tmp;
  io::write_scene(small_scene(), tmp.path());
  for (const char* f : {"meta.json", "poses.json", "frames/0000.ppm", "frames/0003.ppm", "depth/0000.pfm",
                        "depth/0003.pfm"}) {
    EXPECT_TRUE(fs::exists(tmp.path() / f)) << f;
  }
  EXPECT_FALSE(fs::exists(tmp.path() / "frames/0004.ppm"));
  const auto meta = io::parse_json_file(tmp.path() / "meta.json");
  EXPECT_EQ(meta["num_frames"], 4);
  EXPECT_EQ(meta["width"], 24);
  const auto pfm = io::read_file(tmp.path() / "depth/0002.pfm");
  EXPECT_EQ(pfm.rfind("Pf\n24 16\n-1.0\n", 0), 0u);
  EXPECT_EQ(pfm.size(), 14u + 24u * 16u * 4u);
}

TEST(SceneDirectory, ByteIdenticalRewrites) {
  TempDir tmp;
  const auto seq = small_scene();
  io::write_scene(seq, tmp.path() / "a");
  io::write_scene(seq, tmp.path() / "b");
  for (const auto& entry : fs::recursive_directory_iterator(tmp.path() / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), tmp.path() / "a");
    EXPECT_EQ(io::read_file(entry.path()), io::read_file(tmp.path() / "b" / rel)) << rel;
  }
}

TEST(SceneDirectory, FrameQuantizationBound) {
  RgbImage img(5, 3);
  Rng rng(1);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  const auto back = io::decode_ppm(io::encode_ppm(img), "mem");
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_LE(std::abs(back.data()[i] - img.data()[i]), 0.5 / 255 + 1e-7);
}

TEST(SceneDirectory, PfmByteOrder) {
  DepthMap d(2, 2);
  d(0, 0) = 1.0f;
  d(1, 0) = 2.0f;
  d(0, 1) = -0.0f;
  d(1, 1) = 1e-30f;
  const auto bytes = io::encode_pfm(d);
  const auto back = io::decode_pfm(bytes, "mem");
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) EXPECT_EQ(std::bit_cast<std::uint32_t>(back(x, y)), std::bit_cast<std::uint32_t>(d(x, y)));
  // bottom row first: pixel (0,1) = -0.0 -> 00 00 00 80
  EXPECT_EQ(static_cast<unsigned char>(bytes[12 + 3]), 0x80);

  std::string big = "Pf\n1 1\n1.0\n";
  big += std::string("\x3f\x80\x00\x00", 4);
  EXPECT_EQ(io::decode_pfm(big, "mem")(0, 0), 1.0f);
  expect_code(ErrorCode::kParse, [] { io::decode_pfm("PF\n1 1\n-1.0\n", "mem"); });
  expect_code(ErrorCode::kParse, [] { io::decode_pfm("Pf\n1 1\n-1.0\nabc", "mem"); });
}

TEST(SceneDirectory, PlantedViolations) {
  TempDir tmp;
  const auto seq = small_scene();
  auto fresh = [&](const std::string& name) {
    const fs::path dir = tmp.path() / name;
    io::write_scene(seq, dir);
    return dir;
  };

  expect_code(ErrorCode::kMissingFile, [&] { io::read_scene(tmp.path() / "nope"); });

  {
    const auto dir = fresh("reflect");
    auto poses = io::parse_json_file(dir / "poses.json");
    auto& r = poses["poses"][2]["R"];
    for (int j = 0; j < 3; ++j) r[static_cast<std::size_t>(6 + j)] = -r[static_cast<std::size_t>(6 + j)].get<double>();
    io::write_file(dir / "poses.json", io::dump(poses));
    expect_code(ErrorCode::kNonRotation, [&] { io::read_scene(dir); }, "frame 2");
  }
  {
    const auto dir = fresh("missing");
    fs::remove(dir / "depth/0001.pfm");
    expect_code(ErrorCode::kMissingFile, [&] { io::read_scene(dir); }, "0001.pfm");
  }
  {
    const auto dir = fresh("size");
    io::write_pfm(DepthMap(23, 16, 1.0f), dir / "depth/0003.pfm");
    expect_code(ErrorCode::kDimensionMismatch, [&] { io::read_scene(dir); }, "0003.pfm");
  }
  {
    const auto dir = fresh("nan");
    DepthMap d = seq.depths[1];
    d(5, 5) = std::nanf("");
    io::write_pfm(d, dir / "depth/0001.pfm");
    expect_code(ErrorCode::kNonFiniteDepth, [&] { io::read_scene(dir); }, "0001.pfm");
  }
  {
    const auto dir = fresh("count");
    auto poses = io::parse_json_file(dir / "poses.json");
    poses["poses"].erase(poses["poses"].size() - 1);
    io::write_file(dir / "poses.json", io::dump(poses));
    expect_code(ErrorCode::kDimensionMismatch, [&] { io::read_scene(dir); }, "poses.json");
  }
  {
    const auto dir = fresh("json");
    io::write_file(dir / "meta.json", "{\"width\": 24,");
    expect_code(ErrorCode::kParse, [&] { io::read_scene(dir); }, "meta.json");
  }
  {
    const auto dir = fresh("field");
    auto meta = io::parse_json_file(dir / "meta.json");
    meta.erase("fx");
    io::write_file(dir / "meta.json", io::dump(meta));
    expect_code(ErrorCode::kParse, [&] { io::read_scene(dir); }, "fx");
  }
}

TEST(SceneDirectory, GoldenFixture) {
  const fs::path dir = fs::path(GEOSCORE_FIXTURE_DIR) / "golden_orbit";
  const auto seq = io::read_scene(dir);
  EXPECT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq.scene_id, "orbit_5");
  EXPECT_EQ(checksum(seq), 0x332860307e704b7aull);
  EXPECT_TRUE(seq == oracle::render_scene(oracle::make_room_scene(5, oracle::Trajectory::kOrbit, 24, 16, 3)));
}

TEST(Manifest, Parsing) {
  const auto m = io::parse_manifest(R"({"groups": [
      {"context_id": "b", "candidates": [{"seed": 1, "e_recon": 0.2, "alpha": 1.0}, {"seed": 2, "scene_ref": "x"}]},
      {"context_id": "a", "candidates": [{"seed": 0, "e_recon": 0.1, "alpha": 1.0}]}]})",
                                    "/base", "m.json");
  ASSERT_EQ(m.groups.size(), 2u);
  EXPECT_TRUE(m.groups[0][0].scored);
  EXPECT_FALSE(m.groups[0][1].scored);
  EXPECT_EQ(m.groups[0][1].candidate.scene_ref, "x");
  EXPECT_EQ(m.groups[1][0].candidate.context_id, "a");

  EXPECT_TRUE(io::parse_manifest("  \n", "", "m").groups.empty());
  expect_code(ErrorCode::kInvalidInput, [] {
    io::parse_manifest(R"({"groups": [{"context_id": "a", "candidates": [{"seed": 0, "scene_ref": "x"}]},
                                       {"context_id": "a", "candidates": [{"seed": 1, "scene_ref": "y"}]}]})",
                       "", "m");
  }, "duplicate");
  expect_code(ErrorCode::kParse, [] { io::parse_manifest(R"({"groups": [{"context_id": "a", "candidates": [{"seed": 0}]}]})", "", "m"); });
  expect_code(ErrorCode::kParse, [] { io::parse_manifest("{", "", "m"); });
  expect_code(ErrorCode::kParse, [] { io::parse_manifest(R"({"groups": 3})", "", "m"); });
}

TEST(Vocabulary, JsonRoundTrip) {
  const auto v = MotionVocabulary::standard();
  const auto back = io::parse_vocabulary(io::to_json(v).dump(), "vocab");
  EXPECT_EQ(back.pool(), v.pool());
  expect_code(ErrorCode::kParse, [] { io::parse_vocabulary(R"({"translations": ["a"]})", "vocab"); }, "rotations");
}
