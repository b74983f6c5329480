// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "test_util.hpp"
#include "uvqa/archive.hpp"
#include "uvqa/media.hpp"

using namespace uvqa;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("y4m: constant 4x4 stream parses") {
  std::vector<std::uint8_t> stream = bytes_of("YUV4MPEG2 W4 H4 F30:1 Ip A1:1 C420\n");
  for (int f = 0; f < 2; ++f) {
    auto frame = bytes_of("FRAME\n");
    stream.insert(stream.end(), frame.begin(), frame.end());
    stream.insert(stream.end(), 16 + 4 + 4, 128);
  }
  VideoClip clip = parse_y4m(stream);
  CHECK(clip.frame_count() == 2);
  CHECK(clip.width() == 4);
  CHECK(clip.height() == 4);
  CHECK(clip.fps() == doctest::Approx(30.0));
  for (const auto& plane : clip.luma)
    for (float v : plane.data) CHECK(v == doctest::Approx(128.0f / 255.0f));
}

TEST_CASE("y4m: truncated final frame reports the defect") {
  std::vector<std::uint8_t> stream = bytes_of("YUV4MPEG2 W4 H4 F30:1\n");
  auto frame = bytes_of("FRAME\n");
  stream.insert(stream.end(), frame.begin(), frame.end());
  stream.insert(stream.end(), 24, 100);
  stream.insert(stream.end(), frame.begin(), frame.end());
  stream.insert(stream.end(), 10, 100);  // 14 bytes short
  try {
    parse_y4m(stream);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
    CHECK(std::string(e.what()).find("truncated frame") != std::string::npos);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("y4m: unsupported colorspaces are rejected, not converted") {
  for (const char* cs : {"C444", "C422", "C420p10"}) {
    std::string header = std::string("YUV4MPEG2 W4 H4 F30:1 ") + cs + "\n";
    CHECK_THROWS_AS(parse_y4m(bytes_of(header)), Error);
  }
}

TEST_CASE("y4m: writer round-trip is the identity on random clips") {
  VideoClip clip = testutil::clip_from_lumas(
      {testutil::random_plane_8bit(16, 12, 1), testutil::random_plane_8bit(16, 12, 2)},
      25);
  for (auto& u : clip.chroma_u) u = testutil::random_plane_8bit(8, 6, 3);
  for (auto& v : clip.chroma_v) v = testutil::random_plane_8bit(8, 6, 4);
  VideoClip round = parse_y4m(write_y4m(clip));
  REQUIRE(round.frame_count() == clip.frame_count());
  CHECK(round.fps_num == 25);
  for (int f = 0; f < clip.frame_count(); ++f) {
    CHECK(round.luma[f].data == clip.luma[f].data);
    CHECK(round.chroma_u[f].data == clip.chroma_u[f].data);
    CHECK(round.chroma_v[f].data == clip.chroma_v[f].data);
  }
}

TEST_CASE("y4m: 300-frame 720p clip survives the writer and keeps its duration") {
  std::vector<std::uint8_t> bytes;
  {
    VideoClip clip;
    clip.fps_num = 30;
    clip.fps_den = 1;
    clip.luma.assign(300, Plane(1280, 720, 0.25f));
    clip.chroma_u.assign(300, Plane(640, 360, 0.5f));
    clip.chroma_v.assign(300, Plane(640, 360, 0.5f));
    bytes = write_y4m(clip);
  }
  VideoClip round = parse_y4m(bytes);
  CHECK(round.frame_count() == 300);
  CHECK(round.width() == 1280);
  CHECK(round.height() == 720);
  CHECK(round.duration_seconds() == doctest::Approx(10.0));
}

TEST_CASE("raw i420: frame splitting and length validation") {
  std::vector<std::uint8_t> six(6, 7);
  VideoClip one = read_raw_i420(six, 2, 2, 30);
  CHECK(one.frame_count() == 1);
  CHECK(one.has_chroma());

  std::vector<std::uint8_t> nine(9, 7);
  CHECK_THROWS_AS(read_raw_i420(nine, 2, 2, 30), Error);

  std::vector<std::uint8_t> twelve(12, 7);
  CHECK(read_raw_i420(twelve, 2, 2, 30).frame_count() == 2);
}

TEST_CASE("pgm: binary round-trip is bit-exact") {
  Plane p(2, 2);
  p.at(0, 0) = 0.0f;
  p.at(1, 0) = 1.0f;
  p.at(0, 1) = 128.0f / 255.0f;
  p.at(1, 1) = 64.0f / 255.0f;
  Plane round = read_pgm(write_pgm(p));
  CHECK(round.width == 2);
  CHECK(round.height == 2);
  CHECK(round.data == p.data);
}

TEST_CASE("pgm: unsupported variants error out") {
  CHECK_THROWS_AS(read_pgm(bytes_of("P5\n2 2\n65535\n....")), Error);
  CHECK_THROWS_AS(read_pgm(bytes_of("P2\n2 2\n255\n0 0 0 0")), Error);
}

TEST_CASE("pgm: comment lines in the header are skipped") {
  std::vector<std::uint8_t> file = bytes_of("P5\n# a comment\n2\n# another\n2\n255\n");
  file.insert(file.end(), {10, 20, 30, 40});
  Plane p = read_pgm(file);
  CHECK(p.at(0, 0) == doctest::Approx(10.0f / 255.0f));
  CHECK(p.at(1, 1) == doctest::Approx(40.0f / 255.0f));
}

TEST_CASE("frame sampling: floor(k*T/count) indices") {
  CHECK(sample_frames_uniform(300, 30) ==
        std::vector<int>{0,  10, 20, 30,  40,  50,  60,  70,  80,  90,
                         100, 110, 120, 130, 140, 150, 160, 170, 180, 190,
                         200, 210, 220, 230, 240, 250, 260, 270, 280, 290});
  CHECK(sample_frames_uniform(10, 10) ==
        std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(sample_frames_uniform(7, 3) == std::vector<int>{0, 2, 4});
  CHECK_THROWS_AS(sample_frames_uniform(5, 6), Error);
}

TEST_CASE("frame sampling: sorted and deterministic for all small (T,count)") {
  for (int total = 1; total <= 40; ++total) {
    for (int count = 1; count <= total; ++count) {
      auto a = sample_frames_uniform(total, count);
      auto b = sample_frames_uniform(total, count);
      REQUIRE(a == b);
      REQUIRE(static_cast<int>(a.size()) == count);
      for (std::size_t i = 1; i < a.size(); ++i) REQUIRE(a[i] > a[i - 1]);
      REQUIRE(a.back() < total);
    }
  }
}

TEST_CASE("conversion: byte -> float -> byte is the identity") {
  Plane p(16, 16);
  for (int i = 0; i < 256; ++i) p.data[i] = static_cast<float>(i) / 255.0f;
  auto bytes = plane_to_bytes(p);
  for (int i = 0; i < 256; ++i) CHECK(bytes[i] == static_cast<std::uint8_t>(i));
}

TEST_CASE("archive: empty archive is the 13-byte header") {
  TensorArchive empty;
  auto bytes = write_archive(empty);
  CHECK(bytes.size() == 13);
  TensorArchive round = parse_archive(bytes);
  CHECK(round.entries.empty());
}

TEST_CASE("archive: tensors round-trip bit-exactly") {
  TensorArchive archive;
  archive.add("identity", {2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  archive.add("weights/w", {3}, {0.1f, -2.5f, 1e-30f});
  TensorArchive round = parse_archive(write_archive(archive));
  REQUIRE(round.entries.size() == 2);
  CHECK(round.get("identity").shape == std::vector<std::uint64_t>{2, 2});
  CHECK(std::memcmp(round.get("identity").data.data(), archive.get("identity").data.data(),
                    4 * sizeof(float)) == 0);
  CHECK(std::memcmp(round.get("weights/w").data.data(), archive.get("weights/w").data.data(),
                    3 * sizeof(float)) == 0);
}

TEST_CASE("archive: bad magic and version mismatch are rejected") {
  TensorArchive archive;
  archive.add("t", {1}, {1.0f});
  auto bytes = write_archive(archive);

  auto flipped = bytes;
  flipped[0] = 'X';
  try {
    parse_archive(flipped);
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }

  auto versioned = bytes;
  versioned[4] = 99;
  try {
    parse_archive(versioned);
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("version mismatch") != std::string::npos);
  }

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(parse_archive(truncated), Error);
}

TEST_CASE("archive: file round-trip") {
  testutil::TempDir tmp("archive");
  TensorArchive archive;
  archive.add("a", {2, 3}, {1, 2, 3, 4, 5, 6});
  save_archive(archive, tmp.file("weights.uvqa"));
  TensorArchive round = load_archive(tmp.file("weights.uvqa"));
  CHECK(round.get("a").data == archive.get("a").data);
}
