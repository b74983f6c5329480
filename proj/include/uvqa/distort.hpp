// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "uvqa/media.hpp"

namespace uvqa {

// Two-stage synthetic distortion: Gaussian noise or blur of random level,
// followed by a block-DCT compression model.
struct DistortionRecipe {
  enum class FirstStage { noise, blur };

  FirstStage first_stage = FirstStage::noise;
  double first_sigma = 0.0;   // noise: [1,30] on 8-bit scale; blur: [0.5,8]
  int quality = 50;           // block-DCT compression quality, [5,80] when drawn
  std::uint64_t seed = 0;

  void validate() const;
};

// Level ranges used when drawing random recipes.
inline constexpr double kNoiseSigmaMin = 1.0, kNoiseSigmaMax = 30.0;
inline constexpr double kBlurSigmaMin = 0.5, kBlurSigmaMax = 8.0;
inline constexpr int kQualityMin = 5, kQualityMax = 80;

DistortionRecipe random_recipe(std::uint64_t seed);

// I.i.d. zero-mean Gaussian noise, sigma on the 8-bit scale, drawn from the
// counter-based SplitMix64 generator; output clamped to [0,1].
Plane gaussian_noise(const Plane& plane, double sigma, std::uint64_t seed);

// Separable Gaussian, kernel radius ceil(3*sigma), replicated edges.
Plane gaussian_blur(const Plane& plane, double sigma);

// 8x8 block DCT, quantization by the standard luminance table under the
// JPEG quality->scale rule, dequantize, inverse DCT. No entropy coding; the
// artifacts are the point. quality in [1,100].
Plane block_dct_compress(const Plane& plane, int quality);

struct SynthesisRecord {
  DistortionRecipe recipe;
  std::string to_json() const;
};

struct SynthesisResult {
  Plane distorted;
  SynthesisRecord record;
};

SynthesisResult synthesize(const Plane& plane, const DistortionRecipe& recipe);

// Multi-octave value-noise texture in [0,1]; the self-contained stand-in for
// pristine natural images in tests and demo corpora.
Plane make_texture(int width, int height, std::uint64_t seed, int octaves = 4);

struct CorpusOptions {
  std::string input_dir;   // pristine PGMs; empty -> procedural textures
  std::string output_dir;
  int count = 100;
  int texture_size = 136;  // used when input_dir is empty
  std::uint64_t seed = 0;
  int threads = 1;
};

// Writes src_/dist_ PGM pairs, VIF-map label archives and a provenance JSON.
// Returns the number of items written.
int build_distorted_corpus(const CorpusOptions& options);

}  // namespace uvqa
