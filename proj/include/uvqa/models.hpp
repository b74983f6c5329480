// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "uvqa/archive.hpp"
#include "uvqa/media.hpp"
#include "uvqa/metrics.hpp"
#include "uvqa/nn.hpp"

namespace uvqa {

// Declarative layer list; residual groups are bracketed by markers.
struct LayerSpec {
  enum class Kind {
    conv,
    batchnorm,
    relu,
    sigmoid,
    residual_begin,
    residual_end,
    global_average_pool,
    fully_connected,
  };
  Kind kind = Kind::conv;
  int filters = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  int dilation = 1;
  int out_features = 0;  // fully_connected
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
};

// Head conv+BN+ReLU, `depth` residual blocks (conv-BN-ReLU-conv-BN plus the
// identity skip), tail conv to one channel, sigmoid output head. Output is
// spatially equal to the input. Paper-scale: depth 10, width 64.
ModelSpec build_generator_spec(int depth, int width);

// Two independent input branches concatenated after their first conv, four
// dilated residual blocks (dilations 1,2,4,2), global average pooling and
// two fully connected layers (width -> 32 -> 1).
struct PoolingSpec {
  int in_channels_src = 1;
  int in_channels_trans = 1;
  int width = 16;
  ModelSpec source_branch;
  ModelSpec transcoded_branch;
  ModelSpec trunk;
  ModelSpec head;
};
PoolingSpec build_pooling_spec(int in_channels_src, int in_channels_trans, int width);

std::size_t spec_param_count(const ModelSpec& spec, int in_channels);

inline constexpr int kDeskGeneratorDepth = 4;
inline constexpr int kDeskGeneratorWidth = 16;
inline constexpr int kPaperGeneratorDepth = 10;
inline constexpr int kPaperGeneratorWidth = 64;
inline constexpr int kDeskPoolingWidth = 16;

// Builds an nn module stack from a spec (residual markers resolved).
template <typename T>
SequentialT<T> make_sequential(const ModelSpec& spec, int in_channels, CounterRng& rng);

// ---------------------------------------------------------------------------
// Quality-map generator G

template <typename T>
class GeneratorNetT {
 public:
  GeneratorNetT(int depth, int width, std::uint64_t seed);

  TensorT<T> forward(const TensorT<T>& input, bool training) { return net_.forward(input, training); }
  TensorT<T> backward(const TensorT<T>& grad) { return net_.backward(grad); }

  std::vector<ParamRef<T>> params();
  std::vector<ParamRef<T>> buffers();
  std::size_t param_count();

  int depth() const { return depth_; }
  int width() const { return width_; }

  // Runs one luma plane through the net in eval mode; output is a full-size
  // normalized quality map (sigmoid head keeps values in (0,1)).
  QualityMap infer_map(const Plane& frame);

 private:
  int depth_, width_;
  SequentialT<T> net_;
};
using GeneratorNet = GeneratorNetT<float>;

// ---------------------------------------------------------------------------
// Pooling / regression network f

template <typename T>
class PoolingNetT {
 public:
  PoolingNetT(int in_channels_src, int in_channels_trans, int width, std::uint64_t seed);

  // (N,Cs,H,W) x (N,Ct,H,W) -> (N,1) scores.
  TensorT<T> forward(const TensorT<T>& src_stack, const TensorT<T>& trans_stack,
                     bool training);
  void backward(const TensorT<T>& grad_scores);

  std::vector<ParamRef<T>> params();
  std::vector<ParamRef<T>> buffers();
  std::size_t param_count();

  int in_channels_src() const { return in_src_; }
  int in_channels_trans() const { return in_trans_; }
  int width() const { return width_; }

 private:
  int in_src_, in_trans_, width_;
  SequentialT<T> source_branch_, transcoded_branch_, trunk_;
  GlobalAvgPoolT<T> pool_;
  SequentialT<T> head_;
  int cached_src_channels_ = 0;
};
using PoolingNet = PoolingNetT<float>;

// ---------------------------------------------------------------------------
// Weights persistence (UVQA archives; config embedded as a float entry)

void save_generator(GeneratorNet& net, const std::string& path);
GeneratorNet load_generator(const std::string& path);

struct PoolingMeta {
  StackKind stack = StackKind::vif;
  int downsample = 1;
  int frame_count = 30;
  int ablation = 0;  // 0 none, 1 source maps replaced, 2 transcoded maps replaced
};
void save_pooling(PoolingNet& net, const PoolingMeta& meta, const std::string& path);
PoolingNet load_pooling(const std::string& path, PoolingMeta* meta = nullptr);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double alpha = 0.84;  // generator loss mix
  std::uint64_t seed = 0;
};

struct TrainCurve {
  std::vector<double> epoch_loss;
  double initial() const { return epoch_loss.front(); }
  double final() const { return epoch_loss.back(); }
};

struct PatchDataset {
  int patch = 64;
  std::vector<std::vector<float>> inputs;  // patch*patch luma samples in [0,1]
  std::vector<std::vector<float>> labels;  // matching quality-map samples
  std::size_t size() const { return inputs.size(); }
};

// Tiles the aligned (image, label map) region into non-overlapping patches.
void extract_patches(const Plane& distorted, const QualityMap& label, int patch,
                     PatchDataset* out);

// Loads dist_NNNN.pgm / label_NNNN.uvqa pairs produced by the distortion
// corpus builder.
PatchDataset load_patch_dataset(const std::string& dir, int patch = 64);

TrainCurve train_generator(GeneratorNet& net, const PatchDataset& dataset,
                           const TrainConfig& config);

struct MapStackSample {
  Tensor src;    // (C,H,W)
  Tensor trans;  // (C,H,W)
  float label = 0.0f;
};

struct PoolingDataset {
  std::vector<MapStackSample> samples;
};

TrainCurve train_pooling(PoolingNet& net, const PoolingDataset& dataset,
                         const TrainConfig& config);

// Same loop with a hook after every epoch (model selection during the
// experiment protocol snapshots weights from here).
TrainCurve train_pooling_with_callback(
    PoolingNet& net, const PoolingDataset& dataset, const TrainConfig& config,
    const std::function<void(int epoch, double loss)>& after_epoch);

// ---------------------------------------------------------------------------
// Stack assembly and prediction

enum class AblationMode { none, replace_source_maps, replace_transcoded_maps };

struct StackOptions {
  StackKind kind = StackKind::vif;
  int downsample = 1;
  AblationMode ablation = AblationMode::none;
};

struct FrameStacks {
  Tensor src;    // (1,Cs,H,W)
  Tensor trans;  // (1,Ct,H,W)
};

// Source stack from the generator (or raw frame under ablation), transcoded
// stack from the FR evaluator; everything aligned to a common region and
// block-mean downsampled.
FrameStacks build_frame_stacks(const VideoClip& src, const VideoClip& dist, int frame,
                               GeneratorNet& generator, const StackOptions& options);

int stack_channels_src(const StackOptions& options);
int stack_channels_trans(const StackOptions& options);

// Mean over frame_count uniformly sampled frames of the per-frame pooled
// score.
double predict_score(const VideoClip& src, const VideoClip& dist,
                     GeneratorNet& generator, PoolingNet& pooling,
                     const StackOptions& options, int frame_count);

// ---------------------------------------------------------------------------
// Verification helpers (64-bit engine instantiation)

GradCheckReport gradient_check_generator(int depth, int width, int input_size,
                                         std::uint64_t seed);
GradCheckReport gradient_check_pooling(int in_src, int in_trans, int width,
                                       int input_size, std::uint64_t seed);

}  // namespace uvqa
