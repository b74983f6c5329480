// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uvqa/common.hpp"

namespace uvqa {

// One image plane. Working samples are 32-bit floats in [0,1]; 8-bit data is
// converted on ingest with v/255 and written back with round(clamp(v,0,1)*255).
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major, data[y*width + x]

  Plane() = default;
  Plane(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

Plane plane_from_bytes(const std::uint8_t* bytes, int width, int height);
std::vector<std::uint8_t> plane_to_bytes(const Plane& plane);

// Planar 4:2:0 video. Chroma, when present, is exactly half the luma size.
struct VideoClip {
  std::vector<Plane> luma;
  std::vector<Plane> chroma_u;
  std::vector<Plane> chroma_v;
  int fps_num = 30;
  int fps_den = 1;
  std::string id;

  int frame_count() const { return static_cast<int>(luma.size()); }
  int width() const { return luma.empty() ? 0 : luma[0].width; }
  int height() const { return luma.empty() ? 0 : luma[0].height; }
  double fps() const { return static_cast<double>(fps_num) / fps_den; }
  bool has_chroma() const { return !chroma_u.empty(); }
  double duration_seconds() const { return frame_count() / fps(); }
};

// YUV4MPEG2, 8-bit 4:2:0 only. Errors carry the byte offset of the defect.
VideoClip parse_y4m(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_y4m(const VideoClip& clip);
VideoClip load_y4m(const std::string& path);
void save_y4m(const VideoClip& clip, const std::string& path);

// Raw I420: frames of width*height luma plus two quarter-size chroma planes.
VideoClip read_raw_i420(std::span<const std::uint8_t> bytes, int width,
                        int height, double fps);
VideoClip load_raw_i420(const std::string& path, int width, int height, double fps);

// Binary PGM (P5), maxval 255. Round-trip is bit-exact.
Plane read_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_pgm(const Plane& plane);
Plane load_pgm(const std::string& path);
void save_pgm(const Plane& plane, const std::string& path);

// Indices floor(k*T/count) for k in [0,count); strictly increasing.
std::vector<int> sample_frames_uniform(int frame_total, int count);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace uvqa
