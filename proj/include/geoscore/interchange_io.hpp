#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "geoscore/camera_geometry.hpp"
#include "geoscore/consistency_score.hpp"
#include "geoscore/error.hpp"
#include "geoscore/image.hpp"

// On-disk scene layout:
//
//   <dir>/meta.json      width, height, num_frames, fx, fy, cx, cy, scene_id
//   <dir>/poses.json     {"poses": [{"R": [9 row-major], "t": [3]}, ...]}, camera-to-world
//   <dir>/frames/NNNN.ppm  binary 8-bit RGB (P6, maxval 255)
//   <dir>/depth/NNNN.pfm   single-channel float32 PFM, little-endian, scale -1.0
//
// Depth <= 0 marks an invalid pixel.

namespace geoscore::io {

namespace fs = std::filesystem;

inline std::string frame_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.%s", i, ext);
  return buf;
}

inline std::string read_file(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::kMissingFile, path.string() + ": no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIo, path.string() + ": write failed");
}

inline void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCode::kIo, dir.string() + ": cannot create directory");
}

namespace detail {

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string header_token(const std::string& bytes, std::size_t& pos, const std::string& what) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) fail(ErrorCode::kParse, what + ": truncated header");
  return bytes.substr(start, pos - start);
}

inline int header_int(const std::string& bytes, std::size_t& pos, const std::string& what) {
  const std::string tok = header_token(bytes, pos, what);
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || v <= 0) fail(ErrorCode::kParse, what + ": bad header field '" + tok + "'");
  return v;
}

// Exactly one whitespace byte separates the header from the raster.
inline void end_of_header(const std::string& bytes, std::size_t& pos, const std::string& what) {
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    fail(ErrorCode::kParse, what + ": malformed header");
  }
  ++pos;
}

}  // namespace detail

// ---- PPM ----

inline std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.data().size());
  for (float v : img.data()) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  return out;
}

inline RgbImage decode_ppm(const std::string& bytes, const std::string& what) {
  std::size_t pos = 0;
  if (detail::header_token(bytes, pos, what) != "P6") fail(ErrorCode::kParse, what + ": not a binary PPM (P6)");
  const int w = detail::header_int(bytes, pos, what);
  const int h = detail::header_int(bytes, pos, what);
  const int maxval = detail::header_int(bytes, pos, what);
  if (maxval != 255) fail(ErrorCode::kParse, what + ": only 8-bit PPM (maxval 255) is supported");
  detail::end_of_header(bytes, pos, what);
  RgbImage img(w, h);
  if (bytes.size() - pos != img.data().size()) {
    fail(ErrorCode::kParse, what + ": raster has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                                std::to_string(img.data().size()));
  }
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    img.data()[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i]) / 255.0);
  }
  return img;
}

inline void write_ppm(const RgbImage& img, const fs::path& path) { write_file(path, encode_ppm(img)); }

inline RgbImage read_ppm(const fs::path& path) { return decode_ppm(read_file(path), path.string()); }

// ---- PFM ----

inline std::string encode_pfm(const DepthMap& depth) {
  std::string out = "Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + depth.pixel_count() * 4);
  std::size_t o = header;
  // PFM stores rows bottom to top.
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) {
      auto u = std::bit_cast<std::uint32_t>(depth(x, y));
      for (int b = 0; b < 4; ++b) out[o++] = static_cast<char>((u >> (8 * b)) & 0xffu);
    }
  }
  return out;
}

inline DepthMap decode_pfm(const std::string& bytes, const std::string& what) {
  std::size_t pos = 0;
  const std::string magic = detail::header_token(bytes, pos, what);
  if (magic == "PF") fail(ErrorCode::kParse, what + ": three-channel PFM given where depth is expected");
  if (magic != "Pf") fail(ErrorCode::kParse, what + ": not a PFM file");
  const int w = detail::header_int(bytes, pos, what);
  const int h = detail::header_int(bytes, pos, what);
  const std::string scale_tok = detail::header_token(bytes, pos, what);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    fail(ErrorCode::kParse, what + ": bad scale '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) fail(ErrorCode::kParse, what + ": bad scale '" + scale_tok + "'");
  const bool little = scale < 0.0;
  detail::end_of_header(bytes, pos, what);

  DepthMap depth(w, h);
  if (bytes.size() - pos != depth.pixel_count() * 4) {
    fail(ErrorCode::kParse, what + ": raster has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                                std::to_string(depth.pixel_count() * 4));
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) {
        const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++]));
        u |= little ? byte << (8 * b) : byte << (8 * (3 - b));
      }
      depth(x, y) = std::bit_cast<float>(u);
    }
  }
  return depth;
}

inline void write_pfm(const DepthMap& depth, const fs::path& path) { write_file(path, encode_pfm(depth)); }

inline DepthMap read_pfm(const fs::path& path) { return decode_pfm(read_file(path), path.string()); }

// ---- scene directory ----

inline nlohmann::json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

template <typename T>
T json_field(const nlohmann::json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorCode::kParse, what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kParse, what + ": field '" + key + "' has the wrong type");
  }
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_scene(const SceneSequence& seq, const fs::path& dir) {
  seq.validate();
  make_dirs(dir / "frames");
  make_dirs(dir / "depth");
  const Intrinsics& k = seq.intrinsics;
  nlohmann::json meta = {{"width", k.width}, {"height", k.height}, {"num_frames", seq.size()},
                         {"fx", k.fx},       {"fy", k.fy},         {"cx", k.cx},
                         {"cy", k.cy},       {"scene_id", seq.scene_id}};
  write_file(dir / "meta.json", dump(meta));

  nlohmann::json poses = nlohmann::json::array();
  for (const auto& p : seq.poses) {
    nlohmann::json r = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) r.push_back(p.R(i, j));
    }
    poses.push_back({{"R", r}, {"t", {p.t.x(), p.t.y(), p.t.z()}}});
  }
  write_file(dir / "poses.json", dump({{"poses", poses}}));

  for (std::size_t i = 0; i < seq.size(); ++i) {
    write_ppm(seq.frames[i], dir / "frames" / frame_name(i, "ppm"));
    write_pfm(seq.depths[i], dir / "depth" / frame_name(i, "pfm"));
  }
}

inline SceneSequence read_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kMissingFile, dir.string() + ": no such scene directory");

  const fs::path meta_path = dir / "meta.json";
  const nlohmann::json meta = parse_json_file(meta_path);
  const std::string mw = meta_path.string();
  SceneSequence seq;
  Intrinsics& k = seq.intrinsics;
  k.width = json_field<int>(meta, "width", mw);
  k.height = json_field<int>(meta, "height", mw);
  k.fx = json_field<double>(meta, "fx", mw);
  k.fy = json_field<double>(meta, "fy", mw);
  k.cx = json_field<double>(meta, "cx", mw);
  k.cy = json_field<double>(meta, "cy", mw);
  seq.scene_id = json_field<std::string>(meta, "scene_id", mw);
  const int n = json_field<int>(meta, "num_frames", mw);
  if (n < 2) fail(ErrorCode::kInvalidInput, mw + ": num_frames must be >= 2");
  try {
    k.validate();
  } catch (const Error& e) {
    fail(e.code(), mw + ": " + e.what());
  }

  const fs::path poses_path = dir / "poses.json";
  const std::string pw = poses_path.string();
  const auto poses = json_field<std::vector<nlohmann::json>>(parse_json_file(poses_path), "poses", pw);
  if (poses.size() != static_cast<std::size_t>(n)) {
    fail(ErrorCode::kDimensionMismatch,
         pw + ": " + std::to_string(poses.size()) + " poses for " + std::to_string(n) + " frames");
  }
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const std::string tag = pw + ": frame " + std::to_string(i);
    const auto r = json_field<std::vector<double>>(poses[i], "R", tag);
    const auto t = json_field<std::vector<double>>(poses[i], "t", tag);
    if (r.size() != 9 || t.size() != 3) fail(ErrorCode::kParse, tag + ": R needs 9 values and t needs 3");
    CameraPose p;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) p.R(a, b) = r[static_cast<std::size_t>(3 * a + b)];
    }
    p.t = Eigen::Vector3d(t[0], t[1], t[2]);
    if (!p.t.allFinite()) fail(ErrorCode::kInvalidInput, tag + ": non-finite translation");
    if (!is_rotation(p.R)) fail(ErrorCode::kNonRotation, tag + ": R is not a rotation (orthonormal, det +1)");
    seq.poses.push_back(p);
  }

  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const fs::path fp = dir / "frames" / frame_name(idx, "ppm");
    const fs::path dp = dir / "depth" / frame_name(idx, "pfm");
    RgbImage frame = read_ppm(fp);
    if (!frame.same_size(k.width, k.height)) {
      fail(ErrorCode::kDimensionMismatch, fp.string() + ": image is " + std::to_string(frame.width()) + "x" +
                                              std::to_string(frame.height()) + ", meta says " +
                                              std::to_string(k.width) + "x" + std::to_string(k.height));
    }
    DepthMap depth = read_pfm(dp);
    if (!depth.same_size(k.width, k.height)) {
      fail(ErrorCode::kDimensionMismatch, dp.string() + ": depth is " + std::to_string(depth.width()) + "x" +
                                              std::to_string(depth.height()) + ", meta says " +
                                              std::to_string(k.width) + "x" + std::to_string(k.height));
    }
    for (float d : depth.data()) {
      if (!std::isfinite(d)) fail(ErrorCode::kNonFiniteDepth, dp.string() + ": non-finite depth value");
    }
    seq.frames.push_back(std::move(frame));
    seq.depths.push_back(std::move(depth));
  }
  seq.validate();
  return seq;
}

}  // namespace geoscore::io
