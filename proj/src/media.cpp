// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace uvqa {

namespace {

std::string at_offset(const std::string& what, std::size_t offset) {
  return what + " at byte offset " + std::to_string(offset);
}

bool is_y4m_space(std::uint8_t c) { return c == ' '; }

}  // namespace

Plane plane_from_bytes(const std::uint8_t* bytes, int width, int height) {
  Plane p(width, height);
  for (std::size_t i = 0; i < p.data.size(); ++i)
    p.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  return p;
}

std::vector<std::uint8_t> plane_to_bytes(const Plane& plane) {
  std::vector<std::uint8_t> out(plane.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    float v = std::clamp(plane.data[i], 0.0f, 1.0f);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Y4M

VideoClip parse_y4m(std::span<const std::uint8_t> bytes) {
  static constexpr char kSig[] = "YUV4MPEG2";
  constexpr std::size_t sig_len = sizeof(kSig) - 1;
  if (bytes.size() < sig_len ||
      std::memcmp(bytes.data(), kSig, sig_len) != 0) {
    fail(ErrorCode::format, at_offset("malformed header: missing YUV4MPEG2 signature", 0));
  }

  std::size_t pos = sig_len;
  int width = 0, height = 0, fps_num = 0, fps_den = 0;
  std::string colorspace = "420";  // default when no C tag is present

  // Header parameters are space-separated tokens up to the first newline.
  while (pos < bytes.size() && bytes[pos] != '\n') {
    if (is_y4m_space(bytes[pos])) {
      ++pos;
      continue;
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !is_y4m_space(bytes[pos]) && bytes[pos] != '\n') ++pos;
    std::string tok(reinterpret_cast<const char*>(bytes.data() + start), pos - start);
    if (tok.empty()) continue;
    char tag = tok[0];
    std::string val = tok.substr(1);
    switch (tag) {
      case 'W': width = std::atoi(val.c_str()); break;
      case 'H': height = std::atoi(val.c_str()); break;
      case 'F': {
        if (std::sscanf(val.c_str(), "%d:%d", &fps_num, &fps_den) != 2)
          fail(ErrorCode::format, at_offset("malformed header: bad frame rate '" + val + "'", start));
        break;
      }
      case 'C': colorspace = val; break;
      case 'I': case 'A': case 'X': break;  // interlacing/aspect/comment: ignored
      default: break;
    }
  }
  if (pos >= bytes.size())
    fail(ErrorCode::format, at_offset("malformed header: missing terminating newline", pos));
  ++pos;  // consume '\n'

  if (width <= 0 || height <= 0)
    fail(ErrorCode::format, at_offset("malformed header: missing or invalid W/H", 0));
  if (fps_num <= 0 || fps_den <= 0)
    fail(ErrorCode::format, at_offset("malformed header: missing or invalid F tag", 0));
  if (colorspace.rfind("420", 0) != 0)
    fail(ErrorCode::format,
         at_offset("unsupported colorspace 'C" + colorspace + "' (only 8-bit 4:2:0)", 0));
  if (colorspace.find("p10") != std::string::npos || colorspace.find("p12") != std::string::npos ||
      colorspace.find("p16") != std::string::npos)
    fail(ErrorCode::format, at_offset("unsupported colorspace 'C" + colorspace + "' (only 8-bit)", 0));
  if (width % 2 != 0 || height % 2 != 0)
    fail(ErrorCode::format, at_offset("4:2:0 requires even dimensions", 0));

  const int cw = width / 2, ch = height / 2;
  const std::size_t y_size = static_cast<std::size_t>(width) * height;
  const std::size_t c_size = static_cast<std::size_t>(cw) * ch;

  VideoClip clip;
  clip.fps_num = fps_num;
  clip.fps_den = fps_den;

  static constexpr char kFrame[] = "FRAME";
  constexpr std::size_t frame_len = sizeof(kFrame) - 1;
  while (pos < bytes.size()) {
    std::size_t marker_at = pos;
    if (bytes.size() - pos < frame_len ||
        std::memcmp(bytes.data() + pos, kFrame, frame_len) != 0)
      fail(ErrorCode::format, at_offset("malformed FRAME marker", marker_at));
    pos += frame_len;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;  // frame params: ignored
    if (pos >= bytes.size())
      fail(ErrorCode::format, at_offset("truncated frame header", marker_at));
    ++pos;
    if (bytes.size() - pos < y_size + 2 * c_size)
      fail(ErrorCode::format, at_offset("truncated frame", marker_at));
    clip.luma.push_back(plane_from_bytes(bytes.data() + pos, width, height));
    pos += y_size;
    clip.chroma_u.push_back(plane_from_bytes(bytes.data() + pos, cw, ch));
    pos += c_size;
    clip.chroma_v.push_back(plane_from_bytes(bytes.data() + pos, cw, ch));
    pos += c_size;
  }

  if (clip.luma.empty())
    fail(ErrorCode::format, at_offset("stream contains no frames", pos));
  return clip;
}

std::vector<std::uint8_t> write_y4m(const VideoClip& clip) {
  require(clip.frame_count() >= 1, ErrorCode::invalid_arg, "clip has no frames");
  require(clip.has_chroma(), ErrorCode::invalid_arg, "Y4M output requires 4:2:0 chroma");
  char header[128];
  int n = std::snprintf(header, sizeof(header), "YUV4MPEG2 W%d H%d F%d:%d Ip A1:1 C420jpeg\n",
                        clip.width(), clip.height(), clip.fps_num, clip.fps_den);
  std::vector<std::uint8_t> out(header, header + n);
  for (int f = 0; f < clip.frame_count(); ++f) {
    const char* marker = "FRAME\n";
    out.insert(out.end(), marker, marker + 6);
    for (const Plane* p : {&clip.luma[f], &clip.chroma_u[f], &clip.chroma_v[f]}) {
      auto raw = plane_to_bytes(*p);
      out.insert(out.end(), raw.begin(), raw.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Raw I420

VideoClip read_raw_i420(std::span<const std::uint8_t> bytes, int width,
                        int height, double fps) {
  require(width > 0 && height > 0, ErrorCode::invalid_arg, "invalid dimensions");
  require(width % 2 == 0 && height % 2 == 0, ErrorCode::invalid_arg,
          "4:2:0 requires even dimensions");
  const std::size_t y_size = static_cast<std::size_t>(width) * height;
  const std::size_t frame_size = y_size + y_size / 2;
  if (bytes.size() % frame_size != 0)
    fail(ErrorCode::format,
         "stream length " + std::to_string(bytes.size()) +
             " is not a multiple of the frame size " + std::to_string(frame_size));
  if (bytes.empty()) fail(ErrorCode::format, "stream contains no frames");

  VideoClip clip;
  clip.fps_num = static_cast<int>(std::lround(fps * 1000));
  clip.fps_den = 1000;
  if (clip.fps_num % 1000 == 0) {
    clip.fps_num /= 1000;
    clip.fps_den = 1;
  }
  const int cw = width / 2, ch = height / 2;
  const std::size_t c_size = y_size / 4;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    clip.luma.push_back(plane_from_bytes(bytes.data() + pos, width, height));
    pos += y_size;
    clip.chroma_u.push_back(plane_from_bytes(bytes.data() + pos, cw, ch));
    pos += c_size;
    clip.chroma_v.push_back(plane_from_bytes(bytes.data() + pos, cw, ch));
    pos += c_size;
  }
  return clip;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

// Skips whitespace and '#' comment lines, then parses a decimal value.
int pgm_next_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    std::uint8_t c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
    fail(ErrorCode::format, at_offset("malformed PGM header", pos));
  int value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    ++pos;
  }
  return value;
}

}  // namespace

Plane read_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    fail(ErrorCode::format, "not a PGM stream");
  if (bytes[1] == '2')
    fail(ErrorCode::format, "unsupported format: ASCII PGM (P2); only binary P5");
  if (bytes[1] != '5')
    fail(ErrorCode::format, "unsupported format: expected P5 magic");
  std::size_t pos = 2;
  int width = pgm_next_int(bytes, pos);
  int height = pgm_next_int(bytes, pos);
  int maxval = pgm_next_int(bytes, pos);
  if (maxval != 255)
    fail(ErrorCode::format,
         "unsupported format: maxval " + std::to_string(maxval) + " (only 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    fail(ErrorCode::format, at_offset("malformed PGM header", pos));
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < need)
    fail(ErrorCode::format, at_offset("truncated PGM raster", pos));
  return plane_from_bytes(bytes.data() + pos, width, height);
}

std::vector<std::uint8_t> write_pgm(const Plane& plane) {
  char header[64];
  int n = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", plane.width, plane.height);
  std::vector<std::uint8_t> out(header, header + n);
  auto raw = plane_to_bytes(plane);
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

// ---------------------------------------------------------------------------
// Frame sampling

std::vector<int> sample_frames_uniform(int frame_total, int count) {
  require(frame_total >= 1, ErrorCode::invalid_arg, "empty clip");
  require(count >= 1, ErrorCode::invalid_arg, "sample count must be positive");
  require(count <= frame_total, ErrorCode::invalid_arg,
          "sample count " + std::to_string(count) + " exceeds frame total " +
              std::to_string(frame_total));
  std::vector<int> indices(count);
  for (int k = 0; k < count; ++k)
    indices[k] = static_cast<int>((static_cast<std::int64_t>(k) * frame_total) / count);
  return indices;
}

// ---------------------------------------------------------------------------
// File helpers

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot open '" + path + "'");
  f.seekg(0, std::ios::end);
  std::streampos size = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0) f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) fail(ErrorCode::io, "read failed for '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::io, "cannot create '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::io, "write failed for '" + path + "'");
}

void write_text_file(const std::string& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

VideoClip load_y4m(const std::string& path) {
  auto bytes = read_file(path);
  VideoClip clip = parse_y4m(bytes);
  clip.id = path;
  return clip;
}

void save_y4m(const VideoClip& clip, const std::string& path) {
  auto bytes = write_y4m(clip);
  write_file(path, bytes);
}

VideoClip load_raw_i420(const std::string& path, int width, int height, double fps) {
  auto bytes = read_file(path);
  VideoClip clip = read_raw_i420(bytes, width, height, fps);
  clip.id = path;
  return clip;
}

Plane load_pgm(const std::string& path) { return read_pgm(read_file(path)); }

void save_pgm(const Plane& plane, const std::string& path) {
  auto bytes = write_pgm(plane);
  write_file(path, bytes);
}

}  // namespace uvqa
