// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "uvqa/media.hpp"

namespace uvqa {

enum class Metric { ssim, mdsi, vif, motion };

const char* metric_name(Metric m);

// Per-pixel quality grid. crop_x/crop_y locate the map origin inside the
// source frame when the metric shrinks the valid region; pooling uses them
// to align stacks exactly.
struct QualityMap {
  int width = 0;
  int height = 0;
  int crop_x = 0;
  int crop_y = 0;
  Metric metric = Metric::ssim;
  bool normalized = false;
  std::vector<float> values;

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double mean() const;
};

// 10*log10(255^2/MSE) on the 8-bit scale, clamped at `ceiling` dB.
double psnr(const Plane& ref, const Plane& dist, double ceiling = 100.0);

// Single-scale SSIM on luma, 11x11 Gaussian window sigma 1.5, C1=(0.01*255)^2,
// C2=(0.03*255)^2. The map loses a 5-pixel border ('valid' windows). `scalar`
// is the mean of the raw [-1,1] map; when `normalized`, map values are mapped
// to [0,1] via (v+1)/2.
struct SsimResult {
  QualityMap map;
  double scalar = 0.0;
};
SsimResult ssim_map(const Plane& ref, const Plane& dist, bool normalized = true);

// 5-scale MS-SSIM with the standard exponents; falls back to fewer scales
// (renormalized weights) when the inputs are too small. 2x2-mean downsampling.
double ms_ssim(const Plane& ref, const Plane& dist);
int ms_ssim_scale_count(int width, int height);

// MDSI-style map: Prewitt gradient similarity fused with the average image
// (C1=140, C2=55), optionally combined 0.6/0.4 with chromaticity similarity
// (C3=550) from half-resolution chroma planes. Clamped to [0,1], full size.
QualityMap mdsi_map(const Plane& ref, const Plane& dist);
QualityMap mdsi_map_color(const Plane& ref, const Plane& dist,
                          const Plane& ref_u, const Plane& dist_u,
                          const Plane& ref_v, const Plane& dist_v);

// Spatial-domain single-scale VIF map (Gaussian window support 9, sigma 1.5,
// noise variance 2 on the 8-bit scale). 4-pixel border crop, clamped to [0,1].
QualityMap vif_map(const Plane& ref, const Plane& dist);

// |F_n - F_{n-1}| on the [0,1] scale; all zeros when prev is null.
QualityMap motion_map(const Plane& frame, const Plane* prev_frame);

enum class StackKind { ssim, vif, mdsi, vmaf_style };

StackKind stack_kind_from_name(const std::string& name);
const char* stack_kind_name(StackKind kind);

// Normalized quality-map stack for one frame pair. vmaf_style stacks a VIF
// map with a motion map of the distorted clip; the rest are single maps.
std::vector<QualityMap> map_stack(StackKind kind, const Plane& ref_frame,
                                  const Plane& dist_frame,
                                  const Plane* prev_dist_frame);

// Clip-level variant; uses chroma for the MDSI stack when present.
std::vector<QualityMap> map_stack_frame(StackKind kind, const VideoClip& ref,
                                        const VideoClip& dist, int frame);

// Crops every map to the intersection of their valid regions so they can be
// concatenated channel-wise.
void align_stack(std::vector<QualityMap>& stack);

// factor x factor block mean (factor 1 = identity); trailing partial blocks
// are dropped.
QualityMap downsample_map(const QualityMap& map, int factor);

// Frame-mean scalar for a whole clip pair; metric is one of
// psnr|ssim|msssim|vif|mdsi.
double clip_metric_mean(const VideoClip& ref, const VideoClip& dist,
                        const std::string& metric, int threads = 1);

}  // namespace uvqa
