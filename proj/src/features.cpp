// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/features.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace uvqa {

namespace {

// Population standard deviation over a whole plane, accumulated in double.
double population_std(const Plane& p) {
  double sum = 0.0, sum_sq = 0.0;
  for (float v : p.data) {
    sum += v;
    sum_sq += static_cast<double>(v) * v;
  }
  double n = static_cast<double>(p.data.size());
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

Plane to_8bit_scale(const Plane& p) {
  Plane out(p.width, p.height);
  for (std::size_t i = 0; i < p.data.size(); ++i) out.data[i] = p.data[i] * 255.0f;
  return out;
}

}  // namespace

Plane sobel_magnitude(const Plane& plane) {
  require(plane.width >= 3 && plane.height >= 3, ErrorCode::dimension,
          "sobel requires at least 3x3");
  const int w = plane.width, h = plane.height;
  Plane out(w, h);
  auto clamped = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return static_cast<double>(plane.at(x, y));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = -clamped(x - 1, y - 1) + clamped(x + 1, y - 1)
                  - 2.0 * clamped(x - 1, y) + 2.0 * clamped(x + 1, y)
                  - clamped(x - 1, y + 1) + clamped(x + 1, y + 1);
      double gy = -clamped(x - 1, y - 1) - 2.0 * clamped(x, y - 1) - clamped(x + 1, y - 1)
                  + clamped(x - 1, y + 1) + 2.0 * clamped(x, y + 1) + clamped(x + 1, y + 1);
      out.at(x, y) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  }
  return out;
}

double spatial_information(const VideoClip& clip) {
  require(clip.frame_count() >= 1, ErrorCode::invalid_arg, "empty clip");
  double si = 0.0;
  for (const Plane& frame : clip.luma)
    si = std::max(si, population_std(sobel_magnitude(to_8bit_scale(frame))));
  return si;
}

double temporal_information(const VideoClip& clip) {
  require(clip.frame_count() >= 2, ErrorCode::invalid_arg,
          "temporal information requires at least 2 frames");
  double ti = 0.0;
  for (int n = 1; n < clip.frame_count(); ++n) {
    const Plane& cur = clip.luma[n];
    const Plane& prev = clip.luma[n - 1];
    Plane diff(cur.width, cur.height);
    for (std::size_t i = 0; i < diff.data.size(); ++i)
      diff.data[i] = (cur.data[i] - prev.data[i]) * 255.0f;
    ti = std::max(ti, population_std(diff));
  }
  return ti;
}

// ---------------------------------------------------------------------------
// CPBD

namespace {

struct EdgeWidth {
  int width;
  double contrast;
};

// Marziliano-style width: distance between the local extrema bracketing the
// edge pixel along its row, with strict comparisons on the 8-bit samples as
// in the reference implementation (a quantization plateau ends the walk).
// Returns false when the gradient direction is ambiguous (flat neighbors).
bool measure_edge_width(const std::vector<int>& row, int w, int x, EdgeWidth* out) {
  int left_val = row[std::max(x - 1, 0)];
  int right_val = row[std::min(x + 1, w - 1)];
  if (left_val == right_val) return false;
  int dir = right_val > left_val ? 1 : -1;  // rising or falling edge

  int xl = x;
  while (xl - 1 >= 0 && dir * (row[xl] - row[xl - 1]) > 0) --xl;
  int xr = x;
  while (xr + 1 < w && dir * (row[xr + 1] - row[xr]) > 0) ++xr;

  out->width = xr - xl;
  out->contrast = std::abs(row[xr] - row[xl]);
  return out->width > 0;
}

}  // namespace

CpbdResult cpbd(const Plane& plane, const CpbdParams& params) {
  require(plane.width >= params.block_size && plane.height >= params.block_size,
          ErrorCode::dimension,
          "cpbd requires at least " + std::to_string(params.block_size) + "x" +
              std::to_string(params.block_size));

  const int w = plane.width, h = plane.height;

  // 8-bit quantized samples; plateaus in the extrema search become exact.
  std::vector<int> pixels(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    float v = std::clamp(plane.data[i], 0.0f, 1.0f);
    pixels[i] = static_cast<int>(std::lround(v * 255.0f));
  }

  // Horizontal widths are only meaningful across predominantly vertical
  // edges; |Gx| >= |Gy| gates the measured pixels.
  Plane vertical(w, h);
  {
    auto clamped = [&](int x, int y) {
      x = std::clamp(x, 0, w - 1);
      y = std::clamp(y, 0, h - 1);
      return static_cast<double>(plane.at(x, y));
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double gx = -clamped(x - 1, y - 1) + clamped(x + 1, y - 1)
                    - 2.0 * clamped(x - 1, y) + 2.0 * clamped(x + 1, y)
                    - clamped(x - 1, y + 1) + clamped(x + 1, y + 1);
        double gy = -clamped(x - 1, y - 1) - 2.0 * clamped(x, y - 1) - clamped(x + 1, y - 1)
                    + clamped(x - 1, y + 1) + 2.0 * clamped(x, y + 1) + clamped(x + 1, y + 1);
        vertical.at(x, y) = std::abs(gx) >= std::abs(gy) ? 1.0f : 0.0f;
      }
    }
  }

  Plane grad = sobel_magnitude(to_8bit_scale(plane));
  double grad_mean = 0.0;
  for (float g : grad.data) grad_mean += g;
  grad_mean /= static_cast<double>(grad.data.size());
  const double grad_threshold =
      std::max(params.grad_threshold_scale * grad_mean, params.grad_threshold_floor);

  const int block = params.block_size;
  const int blocks_x = w / block, blocks_y = h / block;
  const double edge_block_count = params.edge_block_fraction * block * block;
  const double sharp_width_cut = std::pow(-std::log(1.0 - params.prob_threshold),
                                          1.0 / params.beta);

  long total_edges = 0, sharp_edges = 0;
  std::vector<int> row(w);
  for (int by = 0; by < blocks_y; ++by) {
    for (int bx = 0; bx < blocks_x; ++bx) {
      const int x0 = bx * block, y0 = by * block;
      int edge_pixels = 0;
      for (int y = y0; y < y0 + block; ++y)
        for (int x = x0; x < x0 + block; ++x)
          if (grad.at(x, y) > grad_threshold) ++edge_pixels;
      if (edge_pixels <= edge_block_count) continue;

      for (int y = y0; y < y0 + block; ++y) {
        for (int x = 0; x < w; ++x) row[x] = pixels[static_cast<std::size_t>(y) * w + x];
        for (int x = x0; x < x0 + block; ++x) {
          if (grad.at(x, y) <= grad_threshold) continue;
          if (vertical.at(x, y) == 0.0f) continue;
          EdgeWidth e;
          if (!measure_edge_width(row, w, x, &e)) continue;
          ++total_edges;
          double w_jnb = e.contrast <= params.contrast_threshold ? params.w_jnb_low
                                                                 : params.w_jnb_high;
          // P_blur = 1 - exp(-(width/w_jnb)^beta) <= prob_threshold
          if (e.width <= w_jnb * sharp_width_cut) ++sharp_edges;
        }
      }
    }
  }

  CpbdResult result;
  result.edge_count = static_cast<int>(total_edges);
  if (total_edges == 0) {
    result.value = 1.0;
    result.degenerate = true;
  } else {
    result.value = static_cast<double>(sharp_edges) / static_cast<double>(total_edges);
  }
  return result;
}

FeatureResult feature_triple(const VideoClip& clip, int blur_sample_count,
                             const CpbdParams& params) {
  require(clip.frame_count() >= 1, ErrorCode::invalid_arg, "empty clip");
  FeatureResult result;
  result.triple.si = spatial_information(clip);
  result.triple.ti = temporal_information(clip);

  int samples = std::min(blur_sample_count, clip.frame_count());
  auto indices = sample_frames_uniform(clip.frame_count(), samples);
  double blur_sum = 0.0;
  for (int idx : indices) {
    CpbdResult r = cpbd(clip.luma[idx], params);
    blur_sum += r.value;
    if (r.degenerate) ++result.degenerate_frames;
  }
  result.triple.blur = blur_sum / static_cast<double>(indices.size());
  return result;
}

}  // namespace uvqa
