// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/distort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "uvqa/archive.hpp"
#include "uvqa/metrics.hpp"
#include "uvqa/rng.hpp"

namespace uvqa {

void DistortionRecipe::validate() const {
  require(first_sigma >= 0.0, ErrorCode::invalid_arg, "negative sigma");
  require(quality >= 1 && quality <= 100, ErrorCode::invalid_arg,
          "quality must be in [1,100]");
}

DistortionRecipe random_recipe(std::uint64_t seed) {
  CounterRng rng(seed);
  DistortionRecipe recipe;
  recipe.seed = seed;
  if (rng.next_u64() & 1) {
    recipe.first_stage = DistortionRecipe::FirstStage::noise;
    recipe.first_sigma = rng.next_uniform(kNoiseSigmaMin, kNoiseSigmaMax);
  } else {
    recipe.first_stage = DistortionRecipe::FirstStage::blur;
    recipe.first_sigma = rng.next_uniform(kBlurSigmaMin, kBlurSigmaMax);
  }
  recipe.quality =
      kQualityMin + static_cast<int>(rng.next_below(kQualityMax - kQualityMin + 1));
  return recipe;
}

Plane gaussian_noise(const Plane& plane, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0, ErrorCode::invalid_arg, "negative sigma");
  if (sigma == 0.0) return plane;
  CounterRng rng(seed);
  Plane out(plane.width, plane.height);
  const double scale = sigma / 255.0;
  for (std::size_t i = 0; i < plane.data.size(); ++i) {
    double v = plane.data[i] + scale * rng.next_normal();
    out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

Plane gaussian_blur(const Plane& plane, double sigma) {
  require(sigma >= 0.0, ErrorCode::invalid_arg, "negative sigma");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (radius == 0) return plane;

  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = plane.width, h = plane.height;
  Plane rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * plane.at(std::clamp(x + i, 0, w - 1), y);
      rows.at(x, y) = static_cast<float>(acc);
    }
  }
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * rows.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Block-DCT compression model

namespace {

// Standard JPEG luminance quantization table (Annex K), zig-zag unrolled to
// row-major order.
constexpr int kLumaQuant[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

void quality_scaled_table(int quality, double out[64]) {
  const double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  for (int i = 0; i < 64; ++i) {
    double q = std::floor((kLumaQuant[i] * scale + 50.0) / 100.0);
    out[i] = std::clamp(q, 1.0, 255.0);
  }
}

// Orthonormal 1D DCT-II basis, 8 points.
struct DctBasis {
  double c[8][8];
  DctBasis() {
    constexpr double pi = 3.14159265358979323846;
    for (int k = 0; k < 8; ++k) {
      double norm = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n)
        c[k][n] = norm * std::cos(pi * (2 * n + 1) * k / 16.0);
    }
  }
};

const DctBasis& dct_basis() {
  static const DctBasis basis;
  return basis;
}

void dct8x8(const double in[64], double out[64]) {
  const auto& b = dct_basis();
  double tmp[64];
  for (int y = 0; y < 8; ++y)
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += b.c[k][n] * in[y * 8 + n];
      tmp[y * 8 + k] = acc;
    }
  for (int x = 0; x < 8; ++x)
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += b.c[k][n] * tmp[n * 8 + x];
      out[k * 8 + x] = acc;
    }
}

void idct8x8(const double in[64], double out[64]) {
  const auto& b = dct_basis();
  double tmp[64];
  for (int x = 0; x < 8; ++x)
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += b.c[k][n] * in[k * 8 + x];
      tmp[n * 8 + x] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += b.c[k][n] * tmp[y * 8 + k];
      out[y * 8 + n] = acc;
    }
}

}  // namespace

Plane block_dct_compress(const Plane& plane, int quality) {
  require(quality >= 1 && quality <= 100, ErrorCode::invalid_arg,
          "quality must be in [1,100]");
  double table[64];
  quality_scaled_table(quality, table);

  const int w = plane.width, h = plane.height;
  Plane out(w, h);
  double block[64], coeff[64], recon[64];
  for (int by = 0; by < h; by += 8) {
    for (int bx = 0; bx < w; bx += 8) {
      // Edge-replicated 8x8 block on the centered 8-bit scale.
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          int sx = std::min(bx + x, w - 1), sy = std::min(by + y, h - 1);
          block[y * 8 + x] = static_cast<double>(plane.at(sx, sy)) * 255.0 - 128.0;
        }
      dct8x8(block, coeff);
      for (int i = 0; i < 64; ++i)
        coeff[i] = std::round(coeff[i] / table[i]) * table[i];
      idct8x8(coeff, recon);
      for (int y = 0; y < 8 && by + y < h; ++y)
        for (int x = 0; x < 8 && bx + x < w; ++x) {
          double v = (recon[y * 8 + x] + 128.0) / 255.0;
          out.at(bx + x, by + y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
  }
  return out;
}

std::string SynthesisRecord::to_json() const {
  nlohmann::json j;
  j["first_stage"]["kind"] =
      recipe.first_stage == DistortionRecipe::FirstStage::noise ? "noise" : "blur";
  j["first_stage"]["sigma"] = recipe.first_sigma;
  j["second_stage"]["kind"] = "block_dct";
  j["second_stage"]["quality"] = recipe.quality;
  j["seed"] = recipe.seed;
  return j.dump();
}

SynthesisResult synthesize(const Plane& plane, const DistortionRecipe& recipe) {
  recipe.validate();
  Plane staged = recipe.first_stage == DistortionRecipe::FirstStage::noise
                     ? gaussian_noise(plane, recipe.first_sigma, recipe.seed)
                     : gaussian_blur(plane, recipe.first_sigma);
  SynthesisResult result;
  result.distorted = block_dct_compress(staged, recipe.quality);
  result.record.recipe = recipe;
  return result;
}

// ---------------------------------------------------------------------------
// Procedural textures

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on an integer lattice, bilinear with smoothstep easing.
double value_noise(double x, double y, std::uint64_t seed) {
  auto lattice = [seed](std::int64_t ix, std::int64_t iy) {
    std::uint64_t h = CounterRng::mix(
        seed ^ (static_cast<std::uint64_t>(ix) * 0x8DA6B343ULL) ^
        (static_cast<std::uint64_t>(iy) * 0xD8163841ULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  };
  std::int64_t ix = static_cast<std::int64_t>(std::floor(x));
  std::int64_t iy = static_cast<std::int64_t>(std::floor(y));
  double fx = smoothstep(x - ix), fy = smoothstep(y - iy);
  double v00 = lattice(ix, iy), v10 = lattice(ix + 1, iy);
  double v01 = lattice(ix, iy + 1), v11 = lattice(ix + 1, iy + 1);
  double top = v00 + (v10 - v00) * fx;
  double bottom = v01 + (v11 - v01) * fx;
  return top + (bottom - top) * fy;
}

}  // namespace

Plane make_texture(int width, int height, std::uint64_t seed, int octaves) {
  require(width >= 1 && height >= 1 && octaves >= 1, ErrorCode::invalid_arg,
          "invalid texture parameters");
  Plane out(width, height);
  const double base_freq = 4.0 / std::max(width, height);
  double lo = 1e30, hi = -1e30;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.0, amp = 1.0, freq = base_freq;
      for (int o = 0; o < octaves; ++o) {
        v += amp * value_noise(x * freq, y * freq,
                               CounterRng::derive(seed, static_cast<std::uint64_t>(o)));
        amp *= 0.55;
        freq *= 2.0;
      }
      out.at(x, y) = static_cast<float>(v);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  // Full-range contrast stretch keeps edge content measurable after blur.
  const double scale = hi > lo ? 1.0 / (hi - lo) : 1.0;
  for (float& v : out.data) v = static_cast<float>((v - lo) * scale);
  return out;
}

int build_distorted_corpus(const CorpusOptions& options) {
  namespace fs = std::filesystem;
  require(!options.output_dir.empty(), ErrorCode::invalid_arg, "output dir required");
  require(options.count >= 1, ErrorCode::invalid_arg, "count must be >= 1");
  fs::create_directories(options.output_dir);

  std::vector<std::string> sources;
  if (!options.input_dir.empty()) {
    for (const auto& entry : fs::directory_iterator(options.input_dir))
      if (entry.path().extension() == ".pgm") sources.push_back(entry.path().string());
    std::sort(sources.begin(), sources.end());
    require(!sources.empty(), ErrorCode::io,
            "no .pgm files in '" + options.input_dir + "'");
  }

  nlohmann::json provenance = nlohmann::json::array();
  std::vector<nlohmann::json> records(options.count);

  parallel_for(options.count, options.threads, [&](std::size_t i) {
    Plane pristine =
        sources.empty()
            ? make_texture(options.texture_size, options.texture_size,
                           CounterRng::derive(options.seed, 0x7E57ULL + i))
            : load_pgm(sources[i % sources.size()]);
    DistortionRecipe recipe = random_recipe(CounterRng::derive(options.seed, i));
    SynthesisResult result = synthesize(pristine, recipe);
    // Labels must describe the pair as stored: snap both planes to the 8-bit
    // grid the PGM files will carry before computing the map.
    auto quantized = [](const Plane& p) {
      auto bytes = plane_to_bytes(p);
      return plane_from_bytes(bytes.data(), p.width, p.height);
    };
    pristine = quantized(pristine);
    result.distorted = quantized(result.distorted);
    QualityMap label = vif_map(pristine, result.distorted);

    char name[64];
    std::snprintf(name, sizeof(name), "src_%04zu.pgm", i);
    save_pgm(pristine, (fs::path(options.output_dir) / name).string());
    std::snprintf(name, sizeof(name), "dist_%04zu.pgm", i);
    save_pgm(result.distorted, (fs::path(options.output_dir) / name).string());

    TensorArchive archive;
    archive.add("vif",
                {static_cast<std::uint64_t>(label.height),
                 static_cast<std::uint64_t>(label.width)},
                label.values);
    std::snprintf(name, sizeof(name), "label_%04zu.uvqa", i);
    save_archive(archive, (fs::path(options.output_dir) / name).string());

    nlohmann::json rec = nlohmann::json::parse(result.record.to_json());
    rec["index"] = i;
    rec["crop"] = {label.crop_x, label.crop_y};
    records[i] = std::move(rec);
  });

  for (auto& rec : records) provenance.push_back(std::move(rec));
  write_text_file((fs::path(options.output_dir) / "provenance.json").string(),
                  provenance.dump(2));
  return options.count;
}

}  // namespace uvqa
