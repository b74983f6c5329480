// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "uvqa/media.hpp"

namespace uvqa {

// Content-characterization indices used for corpus sampling. SI and TI are
// computed on the 8-bit luma scale (0..255) so magnitudes stay comparable to
// published figures.
struct FeatureTriple {
  double si = 0.0;
  double ti = 0.0;
  double blur = 0.0;  // CPBD in [0,1]
};

// Per-pixel sqrt(Gx^2 + Gy^2) with the standard 3x3 Sobel kernels; borders
// use edge replication. Input scale is preserved.
Plane sobel_magnitude(const Plane& plane);

// Max over frames of the population standard deviation of the Sobel plane.
double spatial_information(const VideoClip& clip);

// Max over n>=2 of the population standard deviation of F_n - F_{n-1}.
double temporal_information(const VideoClip& clip);

struct CpbdParams {
  int block_size = 64;
  double beta = 3.6;
  double contrast_threshold = 50.0;   // 8-bit scale; at or below -> w_jnb = 5
  double w_jnb_low = 5.0;
  double w_jnb_high = 3.0;
  double prob_threshold = 0.63;       // edges with P_blur <= this count as sharp
  double edge_block_fraction = 0.002; // edge pixels needed for an edge block
  double grad_threshold_scale = 2.0;  // edge pixel: gradmag > scale * mean(gradmag)
  double grad_threshold_floor = 8.0;  // 8-bit Sobel response floor
};

struct CpbdResult {
  double value = 1.0;
  bool degenerate = false;  // no measurable edges: "no detectable blur evidence"
  int edge_count = 0;
};

// Cumulative probability of blur detection. Operates on 8-bit-quantized
// samples so plateau detection in the width measurement is exact.
CpbdResult cpbd(const Plane& plane, const CpbdParams& params = {});

struct FeatureResult {
  FeatureTriple triple;
  int degenerate_frames = 0;  // sampled frames with no measurable edges
  bool cpbd_degenerate() const { return degenerate_frames > 0; }
};

// SI/TI over the whole clip; blur as the mean CPBD of uniformly sampled frames.
FeatureResult feature_triple(const VideoClip& clip, int blur_sample_count = 10,
                             const CpbdParams& params = {});

}  // namespace uvqa
