// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace uvqa {

namespace {

// Double-precision working image for metric internals.
struct DImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  DImage() = default;
  DImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

DImage to_8bit(const Plane& p) {
  DImage img(p.width, p.height);
  for (std::size_t i = 0; i < p.data.size(); ++i)
    img.data[i] = static_cast<double>(p.data[i]) * 255.0;
  return img;
}

std::vector<double> gaussian_kernel(int support, double sigma) {
  std::vector<double> k(support);
  const double c = (support - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < support; ++i) {
    k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable correlation keeping only fully covered ('valid') windows.
DImage correlate_valid(const DImage& img, const std::vector<double>& kernel) {
  const int k = static_cast<int>(kernel.size());
  const int ow = img.width - k + 1;
  const int oh = img.height - k + 1;
  DImage rows(ow, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * img.at(x + i, y);
      rows.at(x, y) = acc;
    }
  }
  DImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * rows.at(x, y + i);
      out.at(x, y) = acc;
    }
  }
  return out;
}

DImage multiply(const DImage& a, const DImage& b) {
  DImage out(a.width, a.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

void check_same_size(const Plane& a, const Plane& b, const char* op) {
  require(a.width == b.width && a.height == b.height, ErrorCode::dimension,
          std::string(op) + ": dimension mismatch " + std::to_string(a.width) + "x" +
              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
              std::to_string(b.height));
}

// Gradient magnitude with the 3x3 Prewitt operator (taps 1/3), replicated
// borders, 8-bit input scale.
DImage prewitt_magnitude(const DImage& img) {
  const int w = img.width, h = img.height;
  DImage out(w, h);
  auto clamped = [&](int x, int y) {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  const double third = 1.0 / 3.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = (clamped(x + 1, y - 1) + clamped(x + 1, y) + clamped(x + 1, y + 1) -
                   clamped(x - 1, y - 1) - clamped(x - 1, y) - clamped(x - 1, y + 1)) *
                  third;
      double gy = (clamped(x - 1, y + 1) + clamped(x, y + 1) + clamped(x + 1, y + 1) -
                   clamped(x - 1, y - 1) - clamped(x, y - 1) - clamped(x + 1, y - 1)) *
                  third;
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

constexpr double kMdsiC1 = 140.0;
constexpr double kMdsiC2 = 55.0;
constexpr double kMdsiC3 = 550.0;
constexpr double kMdsiGradWeight = 0.6;

constexpr int kVifWindow = 9;
constexpr double kVifSigma = 1.5;
constexpr double kVifNoiseVar = 2.0;
constexpr double kVifEps = 1e-10;

struct SsimStats {
  DImage mu_r, mu_d, var_r, var_d, cov;
};

SsimStats ssim_stats(const DImage& ref, const DImage& dist, int window, double sigma) {
  auto kernel = gaussian_kernel(window, sigma);
  SsimStats s;
  s.mu_r = correlate_valid(ref, kernel);
  s.mu_d = correlate_valid(dist, kernel);
  DImage m_rr = correlate_valid(multiply(ref, ref), kernel);
  DImage m_dd = correlate_valid(multiply(dist, dist), kernel);
  DImage m_rd = correlate_valid(multiply(ref, dist), kernel);
  const std::size_t n = s.mu_r.data.size();
  s.var_r = DImage(s.mu_r.width, s.mu_r.height);
  s.var_d = DImage(s.mu_r.width, s.mu_r.height);
  s.cov = DImage(s.mu_r.width, s.mu_r.height);
  for (std::size_t i = 0; i < n; ++i) {
    s.var_r.data[i] = m_rr.data[i] - s.mu_r.data[i] * s.mu_r.data[i];
    s.var_d.data[i] = m_dd.data[i] - s.mu_d.data[i] * s.mu_d.data[i];
    s.cov.data[i] = m_rd.data[i] - s.mu_r.data[i] * s.mu_d.data[i];
  }
  return s;
}

DImage downsample_2x2(const DImage& img) {
  DImage out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.at(x, y) = 0.25 * (img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) +
                             img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1));
  return out;
}

}  // namespace

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::ssim: return "ssim";
    case Metric::mdsi: return "mdsi";
    case Metric::vif: return "vif";
    case Metric::motion: return "motion";
  }
  return "?";
}

double QualityMap::mean() const {
  double sum = 0.0;
  for (float v : values) sum += v;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

double psnr(const Plane& ref, const Plane& dist, double ceiling) {
  check_same_size(ref, dist, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    double d = (static_cast<double>(ref.data[i]) - dist.data[i]) * 255.0;
    mse += d * d;
  }
  mse /= static_cast<double>(ref.data.size());
  if (mse <= 0.0) return ceiling;
  return std::min(10.0 * std::log10(255.0 * 255.0 / mse), ceiling);
}

SsimResult ssim_map(const Plane& ref, const Plane& dist, bool normalized) {
  check_same_size(ref, dist, "ssim");
  require(ref.width >= kSsimWindow && ref.height >= kSsimWindow, ErrorCode::dimension,
          "ssim requires at least 11x11 planes");

  SsimStats s = ssim_stats(to_8bit(ref), to_8bit(dist), kSsimWindow, kSsimSigma);
  const int ow = s.mu_r.width, oh = s.mu_r.height;

  SsimResult result;
  result.map.width = ow;
  result.map.height = oh;
  result.map.crop_x = kSsimWindow / 2;
  result.map.crop_y = kSsimWindow / 2;
  result.map.metric = Metric::ssim;
  result.map.normalized = normalized;
  result.map.values.resize(static_cast<std::size_t>(ow) * oh);

  double sum = 0.0;
  for (std::size_t i = 0; i < result.map.values.size(); ++i) {
    double mu_r = s.mu_r.data[i], mu_d = s.mu_d.data[i];
    double v = ((2.0 * mu_r * mu_d + kSsimC1) * (2.0 * s.cov.data[i] + kSsimC2)) /
               ((mu_r * mu_r + mu_d * mu_d + kSsimC1) *
                (s.var_r.data[i] + s.var_d.data[i] + kSsimC2));
    sum += v;
    result.map.values[i] = static_cast<float>(normalized ? (v + 1.0) / 2.0 : v);
  }
  result.scalar = sum / static_cast<double>(result.map.values.size());
  return result;
}

int ms_ssim_scale_count(int width, int height) {
  int scales = 0;
  int w = width, h = height;
  while (scales < 5 && w >= kSsimWindow && h >= kSsimWindow) {
    ++scales;
    w /= 2;
    h /= 2;
  }
  return scales;
}

double ms_ssim(const Plane& ref, const Plane& dist) {
  check_same_size(ref, dist, "ms_ssim");
  static constexpr double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  const int scales = ms_ssim_scale_count(ref.width, ref.height);
  require(scales >= 1, ErrorCode::dimension, "ms_ssim requires at least 11x11 planes");

  double weight_sum = 0.0;
  for (int j = 0; j < scales; ++j) weight_sum += kWeights[j];

  DImage r = to_8bit(ref), d = to_8bit(dist);
  double score = 1.0;
  for (int j = 0; j < scales; ++j) {
    SsimStats s = ssim_stats(r, d, kSsimWindow, kSsimSigma);
    const std::size_t n = s.mu_r.data.size();
    double cs_sum = 0.0, ssim_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mu_r = s.mu_r.data[i], mu_d = s.mu_d.data[i];
      double cs = (2.0 * s.cov.data[i] + kSsimC2) /
                  (s.var_r.data[i] + s.var_d.data[i] + kSsimC2);
      double lum = (2.0 * mu_r * mu_d + kSsimC1) / (mu_r * mu_r + mu_d * mu_d + kSsimC1);
      cs_sum += cs;
      ssim_sum += lum * cs;
    }
    double w = kWeights[j] / weight_sum;
    // Floor both means so fractional exponents stay real on adversarial input.
    if (j == scales - 1) {
      score *= std::pow(std::max(ssim_sum / n, 1e-6), w);
    } else {
      score *= std::pow(std::max(cs_sum / n, 1e-6), w);
      r = downsample_2x2(r);
      d = downsample_2x2(d);
    }
  }
  return score;
}

namespace {

DImage mdsi_gradient_similarity(const DImage& ref, const DImage& dist) {
  DImage fused(ref.width, ref.height);
  for (std::size_t i = 0; i < fused.data.size(); ++i)
    fused.data[i] = 0.5 * (ref.data[i] + dist.data[i]);
  DImage gr = prewitt_magnitude(ref);
  DImage gd = prewitt_magnitude(dist);
  DImage gf = prewitt_magnitude(fused);
  DImage out(ref.width, ref.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double r = gr.data[i], d = gd.data[i], f = gf.data[i];
    double gs = (2.0 * r * d + kMdsiC1) / (r * r + d * d + kMdsiC1);
    double gs1 = (2.0 * r * f + kMdsiC2) / (r * r + f * f + kMdsiC2);
    double gs2 = (2.0 * d * f + kMdsiC2) / (d * d + f * f + kMdsiC2);
    out.data[i] = gs + gs2 - gs1;
  }
  return out;
}

// Nearest-neighbor 2x upsampling of half-resolution chroma to luma geometry.
DImage upsample_chroma(const Plane& chroma, int luma_w, int luma_h) {
  DImage out(luma_w, luma_h);
  for (int y = 0; y < luma_h; ++y) {
    int cy = std::min(y / 2, chroma.height - 1);
    for (int x = 0; x < luma_w; ++x) {
      int cx = std::min(x / 2, chroma.width - 1);
      out.at(x, y) = static_cast<double>(chroma.at(cx, cy)) * 255.0;
    }
  }
  return out;
}

QualityMap mdsi_from_parts(const DImage& gs, const DImage* cs) {
  QualityMap map;
  map.width = gs.width;
  map.height = gs.height;
  map.metric = Metric::mdsi;
  map.normalized = true;
  map.values.resize(gs.data.size());
  for (std::size_t i = 0; i < gs.data.size(); ++i) {
    double v = cs ? kMdsiGradWeight * gs.data[i] + (1.0 - kMdsiGradWeight) * cs->data[i]
                  : gs.data[i];
    map.values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return map;
}

}  // namespace

QualityMap mdsi_map(const Plane& ref, const Plane& dist) {
  check_same_size(ref, dist, "mdsi");
  DImage gs = mdsi_gradient_similarity(to_8bit(ref), to_8bit(dist));
  return mdsi_from_parts(gs, nullptr);
}

QualityMap mdsi_map_color(const Plane& ref, const Plane& dist,
                          const Plane& ref_u, const Plane& dist_u,
                          const Plane& ref_v, const Plane& dist_v) {
  check_same_size(ref, dist, "mdsi");
  check_same_size(ref_u, dist_u, "mdsi chroma");
  check_same_size(ref_v, dist_v, "mdsi chroma");
  DImage gs = mdsi_gradient_similarity(to_8bit(ref), to_8bit(dist));
  DImage ru = upsample_chroma(ref_u, ref.width, ref.height);
  DImage du = upsample_chroma(dist_u, ref.width, ref.height);
  DImage rv = upsample_chroma(ref_v, ref.width, ref.height);
  DImage dv = upsample_chroma(dist_v, ref.width, ref.height);
  DImage cs(ref.width, ref.height);
  for (std::size_t i = 0; i < cs.data.size(); ++i) {
    double num = 2.0 * (ru.data[i] * du.data[i] + rv.data[i] * dv.data[i]) + kMdsiC3;
    double den = ru.data[i] * ru.data[i] + du.data[i] * du.data[i] +
                 rv.data[i] * rv.data[i] + dv.data[i] * dv.data[i] + kMdsiC3;
    cs.data[i] = num / den;
  }
  return mdsi_from_parts(gs, &cs);
}

QualityMap vif_map(const Plane& ref, const Plane& dist) {
  check_same_size(ref, dist, "vif");
  require(ref.width >= kVifWindow && ref.height >= kVifWindow, ErrorCode::dimension,
          "vif requires at least 9x9 planes");

  SsimStats s = ssim_stats(to_8bit(ref), to_8bit(dist), kVifWindow, kVifSigma);

  QualityMap map;
  map.width = s.mu_r.width;
  map.height = s.mu_r.height;
  map.crop_x = kVifWindow / 2;
  map.crop_y = kVifWindow / 2;
  map.metric = Metric::vif;
  map.normalized = true;
  map.values.resize(s.mu_r.data.size());

  for (std::size_t i = 0; i < map.values.size(); ++i) {
    double var_r = std::max(s.var_r.data[i], 0.0);
    double var_d = std::max(s.var_d.data[i], 0.0);
    double cov = s.cov.data[i];
    double v;
    if (var_r < kVifEps) {
      v = 1.0;  // flat reference patch carries no information to lose
    } else {
      double g = cov / (var_r + kVifEps);
      double sv2 = std::max(var_d - g * cov, 0.0);
      v = std::log1p(g * g * var_r / (sv2 + kVifNoiseVar)) /
          std::log1p(var_r / kVifNoiseVar);
    }
    map.values[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return map;
}

QualityMap motion_map(const Plane& frame, const Plane* prev_frame) {
  QualityMap map;
  map.width = frame.width;
  map.height = frame.height;
  map.metric = Metric::motion;
  map.normalized = true;
  map.values.assign(frame.data.size(), 0.0f);
  if (prev_frame != nullptr) {
    check_same_size(frame, *prev_frame, "motion");
    for (std::size_t i = 0; i < frame.data.size(); ++i)
      map.values[i] = std::abs(frame.data[i] - prev_frame->data[i]);
  }
  return map;
}

StackKind stack_kind_from_name(const std::string& name) {
  if (name == "ssim") return StackKind::ssim;
  if (name == "vif") return StackKind::vif;
  if (name == "mdsi") return StackKind::mdsi;
  if (name == "vmaf_style" || name == "vmaf") return StackKind::vmaf_style;
  fail(ErrorCode::invalid_arg, "unknown stack kind '" + name + "'");
}

const char* stack_kind_name(StackKind kind) {
  switch (kind) {
    case StackKind::ssim: return "ssim";
    case StackKind::vif: return "vif";
    case StackKind::mdsi: return "mdsi";
    case StackKind::vmaf_style: return "vmaf_style";
  }
  return "?";
}

std::vector<QualityMap> map_stack(StackKind kind, const Plane& ref_frame,
                                  const Plane& dist_frame,
                                  const Plane* prev_dist_frame) {
  std::vector<QualityMap> stack;
  switch (kind) {
    case StackKind::ssim:
      stack.push_back(ssim_map(ref_frame, dist_frame, true).map);
      break;
    case StackKind::vif:
      stack.push_back(vif_map(ref_frame, dist_frame));
      break;
    case StackKind::mdsi:
      stack.push_back(mdsi_map(ref_frame, dist_frame));
      break;
    case StackKind::vmaf_style:
      stack.push_back(vif_map(ref_frame, dist_frame));
      stack.push_back(motion_map(dist_frame, prev_dist_frame));
      break;
  }
  return stack;
}

std::vector<QualityMap> map_stack_frame(StackKind kind, const VideoClip& ref,
                                        const VideoClip& dist, int frame) {
  require(frame >= 0 && frame < ref.frame_count() && frame < dist.frame_count(),
          ErrorCode::invalid_arg, "frame index out of range");
  if (kind == StackKind::mdsi && ref.has_chroma() && dist.has_chroma()) {
    std::vector<QualityMap> stack;
    stack.push_back(mdsi_map_color(ref.luma[frame], dist.luma[frame],
                                   ref.chroma_u[frame], dist.chroma_u[frame],
                                   ref.chroma_v[frame], dist.chroma_v[frame]));
    return stack;
  }
  const Plane* prev = frame > 0 ? &dist.luma[frame - 1] : nullptr;
  return map_stack(kind, ref.luma[frame], dist.luma[frame], prev);
}

void align_stack(std::vector<QualityMap>& stack) {
  if (stack.size() < 2) return;
  int x0 = 0, y0 = 0;
  int x1 = std::numeric_limits<int>::max(), y1 = std::numeric_limits<int>::max();
  for (const auto& m : stack) {
    x0 = std::max(x0, m.crop_x);
    y0 = std::max(y0, m.crop_y);
    x1 = std::min(x1, m.crop_x + m.width);
    y1 = std::min(y1, m.crop_y + m.height);
  }
  require(x1 > x0 && y1 > y0, ErrorCode::dimension, "stack regions do not overlap");
  for (auto& m : stack) {
    if (m.crop_x == x0 && m.crop_y == y0 && m.width == x1 - x0 && m.height == y1 - y0)
      continue;
    QualityMap cropped;
    cropped.width = x1 - x0;
    cropped.height = y1 - y0;
    cropped.crop_x = x0;
    cropped.crop_y = y0;
    cropped.metric = m.metric;
    cropped.normalized = m.normalized;
    cropped.values.resize(static_cast<std::size_t>(cropped.width) * cropped.height);
    for (int y = 0; y < cropped.height; ++y)
      for (int x = 0; x < cropped.width; ++x)
        cropped.values[static_cast<std::size_t>(y) * cropped.width + x] =
            m.at(x0 - m.crop_x + x, y0 - m.crop_y + y);
    m = std::move(cropped);
  }
}

QualityMap downsample_map(const QualityMap& map, int factor) {
  require(factor >= 1, ErrorCode::invalid_arg, "downsample factor must be >= 1");
  if (factor == 1) return map;
  QualityMap out;
  out.width = map.width / factor;
  out.height = map.height / factor;
  require(out.width >= 1 && out.height >= 1, ErrorCode::dimension,
          "map too small for downsample factor " + std::to_string(factor));
  out.crop_x = map.crop_x;
  out.crop_y = map.crop_y;
  out.metric = map.metric;
  out.normalized = map.normalized;
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) acc += map.at(x * factor + dx, y * factor + dy);
      out.values[static_cast<std::size_t>(y) * out.width + x] = static_cast<float>(acc * inv);
    }
  }
  return out;
}

double clip_metric_mean(const VideoClip& ref, const VideoClip& dist,
                        const std::string& metric, int threads) {
  require(ref.frame_count() == dist.frame_count(), ErrorCode::dimension,
          "clips have different frame counts");
  require(metric == "psnr" || metric == "ssim" || metric == "msssim" ||
              metric == "vif" || metric == "mdsi",
          ErrorCode::invalid_arg, "unknown metric '" + metric + "'");
  check_same_size(ref.luma[0], dist.luma[0], "clip metric");
  require(metric == "psnr" || (ref.width() >= kSsimWindow && ref.height() >= kSsimWindow),
          ErrorCode::dimension, "frames too small for windowed metrics");
  const int n = ref.frame_count();
  std::vector<double> per_frame(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const Plane& r = ref.luma[i];
    const Plane& d = dist.luma[i];
    if (metric == "psnr") {
      per_frame[i] = psnr(r, d);
    } else if (metric == "ssim") {
      per_frame[i] = ssim_map(r, d, false).scalar;
    } else if (metric == "msssim") {
      per_frame[i] = ms_ssim(r, d);
    } else if (metric == "vif") {
      per_frame[i] = vif_map(r, d).mean();
    } else {
      per_frame[i] = mdsi_map(r, d).mean();
    }
  });
  return std::accumulate(per_frame.begin(), per_frame.end(), 0.0) / n;
}

}  // namespace uvqa
