// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/models.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace uvqa {

// ---------------------------------------------------------------------------
// Specs

namespace {

LayerSpec conv_spec(int filters, int kernel, int stride, int pad, int dilation = 1) {
  LayerSpec s;
  s.kind = LayerSpec::Kind::conv;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  s.dilation = dilation;
  return s;
}

LayerSpec plain(LayerSpec::Kind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

LayerSpec fc_spec(int out_features) {
  LayerSpec s;
  s.kind = LayerSpec::Kind::fully_connected;
  s.out_features = out_features;
  return s;
}

// conv-BN-ReLU-conv-BN wrapped in an identity skip; dilated variants pad by
// the dilation so the spatial shape is preserved.
void append_residual_block(ModelSpec& spec, int width, int dilation = 1) {
  spec.layers.push_back(plain(LayerSpec::Kind::residual_begin));
  spec.layers.push_back(conv_spec(width, 3, 1, dilation, dilation));
  spec.layers.push_back(plain(LayerSpec::Kind::batchnorm));
  spec.layers.push_back(plain(LayerSpec::Kind::relu));
  spec.layers.push_back(conv_spec(width, 3, 1, dilation, dilation));
  spec.layers.push_back(plain(LayerSpec::Kind::batchnorm));
  spec.layers.push_back(plain(LayerSpec::Kind::residual_end));
}

}  // namespace

ModelSpec build_generator_spec(int depth, int width) {
  require(depth >= 1 && width >= 1, ErrorCode::invalid_arg,
          "generator needs depth >= 1 and width >= 1");
  ModelSpec spec;
  spec.layers.push_back(conv_spec(width, 3, 1, 1));
  spec.layers.push_back(plain(LayerSpec::Kind::batchnorm));
  spec.layers.push_back(plain(LayerSpec::Kind::relu));
  for (int i = 0; i < depth; ++i) append_residual_block(spec, width);
  spec.layers.push_back(conv_spec(1, 3, 1, 1));
  spec.layers.push_back(plain(LayerSpec::Kind::sigmoid));
  return spec;
}

PoolingSpec build_pooling_spec(int in_channels_src, int in_channels_trans, int width) {
  require(in_channels_src >= 1 && in_channels_trans >= 1, ErrorCode::invalid_arg,
          "pooling net needs positive channel counts");
  require(width >= 2 && width % 2 == 0, ErrorCode::invalid_arg,
          "pooling width must be even");
  PoolingSpec spec;
  spec.in_channels_src = in_channels_src;
  spec.in_channels_trans = in_channels_trans;
  spec.width = width;
  for (ModelSpec* branch : {&spec.source_branch, &spec.transcoded_branch}) {
    branch->layers.push_back(conv_spec(width / 2, 3, 1, 1));
    branch->layers.push_back(plain(LayerSpec::Kind::batchnorm));
    branch->layers.push_back(plain(LayerSpec::Kind::relu));
  }
  static constexpr int kDilations[4] = {1, 2, 4, 2};
  for (int d : kDilations) append_residual_block(spec.trunk, width, d);
  spec.head.layers.push_back(fc_spec(32));
  spec.head.layers.push_back(plain(LayerSpec::Kind::relu));
  spec.head.layers.push_back(fc_spec(1));
  return spec;
}

std::size_t spec_param_count(const ModelSpec& spec, int in_channels) {
  std::size_t count = 0;
  int channels = in_channels;
  for (const auto& layer : spec.layers) {
    switch (layer.kind) {
      case LayerSpec::Kind::conv:
        count += static_cast<std::size_t>(layer.filters) * channels * layer.kernel *
                     layer.kernel +
                 layer.filters;
        channels = layer.filters;
        break;
      case LayerSpec::Kind::batchnorm:
        count += 2 * static_cast<std::size_t>(channels);
        break;
      case LayerSpec::Kind::fully_connected:
        count += static_cast<std::size_t>(layer.out_features) * channels +
                 layer.out_features;
        channels = layer.out_features;
        break;
      default:
        break;
    }
  }
  return count;
}

template <typename T>
SequentialT<T> make_sequential(const ModelSpec& spec, int in_channels, CounterRng& rng) {
  SequentialT<T> seq;
  int channels = in_channels;
  int conv_idx = 0, bn_idx = 0, act_idx = 0, fc_idx = 0, block_idx = 0;

  std::size_t i = 0;
  auto build_range = [&](auto&& self, SequentialT<T>& out, std::size_t end) -> void {
    while (i < end) {
      const LayerSpec& layer = spec.layers[i];
      switch (layer.kind) {
        case LayerSpec::Kind::conv:
          out.add("conv" + std::to_string(conv_idx++),
                  std::make_unique<Conv2dT<T>>(
                      channels, layer.filters, layer.kernel,
                      ConvGeometry{layer.stride, layer.pad, layer.dilation}, rng));
          channels = layer.filters;
          ++i;
          break;
        case LayerSpec::Kind::batchnorm:
          out.add("bn" + std::to_string(bn_idx++),
                  std::make_unique<BatchNorm2dT<T>>(channels));
          ++i;
          break;
        case LayerSpec::Kind::relu:
          out.add("relu" + std::to_string(act_idx++),
                  std::make_unique<ActivationT<T>>(Activation::relu));
          ++i;
          break;
        case LayerSpec::Kind::sigmoid:
          out.add("sigmoid" + std::to_string(act_idx++),
                  std::make_unique<ActivationT<T>>(Activation::sigmoid));
          ++i;
          break;
        case LayerSpec::Kind::global_average_pool:
          out.add("gap", std::make_unique<GlobalAvgPoolT<T>>());
          ++i;
          break;
        case LayerSpec::Kind::fully_connected:
          out.add("fc" + std::to_string(fc_idx++),
                  std::make_unique<LinearT<T>>(channels, layer.out_features, rng));
          channels = layer.out_features;
          ++i;
          break;
        case LayerSpec::Kind::residual_begin: {
          ++i;  // consume the marker
          std::size_t close = i;
          int nesting = 1;
          while (close < spec.layers.size() && nesting > 0) {
            if (spec.layers[close].kind == LayerSpec::Kind::residual_begin) ++nesting;
            if (spec.layers[close].kind == LayerSpec::Kind::residual_end) --nesting;
            if (nesting > 0) ++close;
          }
          require(nesting == 0, ErrorCode::invalid_arg, "unbalanced residual markers");
          SequentialT<T> branch;
          self(self, branch, close);
          i = close + 1;  // skip the end marker
          out.add("block" + std::to_string(block_idx++),
                  std::make_unique<ResidualBlockT<T>>(std::move(branch)));
          break;
        }
        case LayerSpec::Kind::residual_end:
          fail(ErrorCode::invalid_arg, "residual_end without matching begin");
      }
    }
  };
  build_range(build_range, seq, spec.layers.size());
  return seq;
}

template SequentialT<float> make_sequential<float>(const ModelSpec&, int, CounterRng&);
template SequentialT<double> make_sequential<double>(const ModelSpec&, int, CounterRng&);

// ---------------------------------------------------------------------------
// GeneratorNet

template <typename T>
GeneratorNetT<T>::GeneratorNetT(int depth, int width, std::uint64_t seed)
    : depth_(depth), width_(width) {
  CounterRng rng(CounterRng::derive(seed, 0x6E6Eull));
  net_ = make_sequential<T>(build_generator_spec(depth, width), 1, rng);
}

template <typename T>
std::vector<ParamRef<T>> GeneratorNetT<T>::params() {
  std::vector<ParamRef<T>> out;
  net_.collect_params("g", out);
  return out;
}

template <typename T>
std::vector<ParamRef<T>> GeneratorNetT<T>::buffers() {
  std::vector<ParamRef<T>> out;
  net_.collect_buffers("g", out);
  return out;
}

template <typename T>
std::size_t GeneratorNetT<T>::param_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.tensor->data.size();
  return n;
}

template <typename T>
QualityMap GeneratorNetT<T>::infer_map(const Plane& frame) {
  TensorT<T> input({1, 1, frame.height, frame.width});
  for (std::size_t i = 0; i < frame.data.size(); ++i)
    input.data[i] = static_cast<T>(frame.data[i]);
  TensorT<T> out = net_.forward(input, false);
  QualityMap map;
  map.width = frame.width;
  map.height = frame.height;
  map.metric = Metric::vif;  // tag of the label family the net was trained on
  map.normalized = true;
  map.values.resize(out.data.size());
  for (std::size_t i = 0; i < out.data.size(); ++i)
    map.values[i] = static_cast<float>(out.data[i]);
  return map;
}

template class GeneratorNetT<float>;
template class GeneratorNetT<double>;

// ---------------------------------------------------------------------------
// PoolingNet

template <typename T>
PoolingNetT<T>::PoolingNetT(int in_channels_src, int in_channels_trans, int width,
                            std::uint64_t seed)
    : in_src_(in_channels_src), in_trans_(in_channels_trans), width_(width) {
  PoolingSpec spec = build_pooling_spec(in_channels_src, in_channels_trans, width);
  CounterRng rng(CounterRng::derive(seed, 0x9001ull));
  source_branch_ = make_sequential<T>(spec.source_branch, in_channels_src, rng);
  transcoded_branch_ = make_sequential<T>(spec.transcoded_branch, in_channels_trans, rng);
  trunk_ = make_sequential<T>(spec.trunk, width, rng);
  head_ = make_sequential<T>(spec.head, width, rng);
}

template <typename T>
TensorT<T> PoolingNetT<T>::forward(const TensorT<T>& src_stack,
                                   const TensorT<T>& trans_stack, bool training) {
  require(src_stack.dim(1) == in_src_ && trans_stack.dim(1) == in_trans_,
          ErrorCode::dimension, "pooling net: stack channel mismatch");
  TensorT<T> a = source_branch_.forward(src_stack, training);
  TensorT<T> b = transcoded_branch_.forward(trans_stack, training);
  cached_src_channels_ = a.dim(1);
  TensorT<T> x = concat_channels(a, b);
  x = trunk_.forward(x, training);
  x = pool_.forward(x, training);
  return head_.forward(x, training);
}

template <typename T>
void PoolingNetT<T>::backward(const TensorT<T>& grad_scores) {
  TensorT<T> g = head_.backward(grad_scores);
  g = pool_.backward(g);
  g = trunk_.backward(g);
  TensorT<T> ga, gb;
  split_channels(g, cached_src_channels_, &ga, &gb);
  source_branch_.backward(ga);
  transcoded_branch_.backward(gb);
}

template <typename T>
std::vector<ParamRef<T>> PoolingNetT<T>::params() {
  std::vector<ParamRef<T>> out;
  source_branch_.collect_params("src", out);
  transcoded_branch_.collect_params("trans", out);
  trunk_.collect_params("trunk", out);
  head_.collect_params("head", out);
  return out;
}

template <typename T>
std::vector<ParamRef<T>> PoolingNetT<T>::buffers() {
  std::vector<ParamRef<T>> out;
  source_branch_.collect_buffers("src", out);
  transcoded_branch_.collect_buffers("trans", out);
  trunk_.collect_buffers("trunk", out);
  head_.collect_buffers("head", out);
  return out;
}

template <typename T>
std::size_t PoolingNetT<T>::param_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.tensor->data.size();
  return n;
}

template class PoolingNetT<float>;
template class PoolingNetT<double>;

// ---------------------------------------------------------------------------
// Weights persistence

namespace {

void store_tensors(TensorArchive& archive, const std::vector<ParamRef<float>>& refs) {
  for (const auto& ref : refs) {
    std::vector<std::uint64_t> shape(ref.tensor->shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i)
      shape[i] = static_cast<std::uint64_t>(ref.tensor->shape[i]);
    archive.add(ref.name, std::move(shape), ref.tensor->data);
  }
}

void restore_tensors(const TensorArchive& archive,
                     const std::vector<ParamRef<float>>& refs) {
  for (const auto& ref : refs) {
    const TensorEntry& e = archive.get(ref.name);
    require(e.data.size() == ref.tensor->data.size(), ErrorCode::format,
            "weights entry '" + ref.name + "' has the wrong size");
    ref.tensor->data = e.data;
  }
}

}  // namespace

void save_generator(GeneratorNet& net, const std::string& path) {
  TensorArchive archive;
  archive.add("__config__", {2},
              {static_cast<float>(net.depth()), static_cast<float>(net.width())});
  auto params = net.params();
  auto buffers = net.buffers();
  store_tensors(archive, params);
  store_tensors(archive, buffers);
  save_archive(archive, path);
}

GeneratorNet load_generator(const std::string& path) {
  TensorArchive archive = load_archive(path);
  const TensorEntry& config = archive.get("__config__");
  require(config.data.size() == 2, ErrorCode::format, "bad generator config entry");
  GeneratorNet net(static_cast<int>(config.data[0]), static_cast<int>(config.data[1]), 0);
  restore_tensors(archive, net.params());
  restore_tensors(archive, net.buffers());
  return net;
}

void save_pooling(PoolingNet& net, const PoolingMeta& meta, const std::string& path) {
  TensorArchive archive;
  archive.add("__config__", {7},
              {static_cast<float>(net.in_channels_src()),
               static_cast<float>(net.in_channels_trans()),
               static_cast<float>(net.width()),
               static_cast<float>(static_cast<int>(meta.stack)),
               static_cast<float>(meta.downsample),
               static_cast<float>(meta.frame_count),
               static_cast<float>(meta.ablation)});
  store_tensors(archive, net.params());
  store_tensors(archive, net.buffers());
  save_archive(archive, path);
}

PoolingNet load_pooling(const std::string& path, PoolingMeta* meta) {
  TensorArchive archive = load_archive(path);
  const TensorEntry& config = archive.get("__config__");
  require(config.data.size() == 7, ErrorCode::format, "bad pooling config entry");
  PoolingNet net(static_cast<int>(config.data[0]), static_cast<int>(config.data[1]),
                 static_cast<int>(config.data[2]), 0);
  restore_tensors(archive, net.params());
  restore_tensors(archive, net.buffers());
  if (meta) {
    meta->stack = static_cast<StackKind>(static_cast<int>(config.data[3]));
    meta->downsample = static_cast<int>(config.data[4]);
    meta->frame_count = static_cast<int>(config.data[5]);
    meta->ablation = static_cast<int>(config.data[6]);
  }
  return net;
}

// ---------------------------------------------------------------------------
// Patch dataset

void extract_patches(const Plane& distorted, const QualityMap& label, int patch,
                     PatchDataset* out) {
  require(patch >= 1, ErrorCode::invalid_arg, "patch size must be positive");
  // Tile the region where image and map overlap (the map may be border-cropped).
  const int tiles_x = label.width / patch;
  const int tiles_y = label.height / patch;
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      std::vector<float> in(static_cast<std::size_t>(patch) * patch);
      std::vector<float> lb(static_cast<std::size_t>(patch) * patch);
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          int mx = tx * patch + x, my = ty * patch + y;
          lb[static_cast<std::size_t>(y) * patch + x] = label.at(mx, my);
          in[static_cast<std::size_t>(y) * patch + x] =
              distorted.at(label.crop_x + mx, label.crop_y + my);
        }
      }
      out->inputs.push_back(std::move(in));
      out->labels.push_back(std::move(lb));
    }
  }
  out->patch = patch;
}

PatchDataset load_patch_dataset(const std::string& dir, int patch) {
  namespace fs = std::filesystem;
  PatchDataset ds;
  ds.patch = patch;
  std::vector<std::string> dist_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("dist_", 0) == 0 && entry.path().extension() == ".pgm")
      dist_files.push_back(entry.path().string());
  }
  std::sort(dist_files.begin(), dist_files.end());
  require(!dist_files.empty(), ErrorCode::io, "no dist_*.pgm files in '" + dir + "'");

  for (const auto& dist_path : dist_files) {
    std::string label_path = dist_path;
    auto pos = label_path.rfind("dist_");
    label_path.replace(pos, 5, "label_");
    label_path.replace(label_path.size() - 4, 4, ".uvqa");

    Plane dist = load_pgm(dist_path);
    TensorArchive archive = load_archive(label_path);
    const TensorEntry& e = archive.get("vif");
    require(e.shape.size() == 2, ErrorCode::format, "label tensor must be rank 2");
    QualityMap label;
    label.height = static_cast<int>(e.shape[0]);
    label.width = static_cast<int>(e.shape[1]);
    label.metric = Metric::vif;
    label.normalized = true;
    label.values = e.data;
    // VIF maps lose a fixed border; recover the offset from the geometry.
    label.crop_x = (dist.width - label.width) / 2;
    label.crop_y = (dist.height - label.height) / 2;
    extract_patches(dist, label, patch, &ds);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_below(i)]);
  return idx;
}

AdamConfig adam_from(const TrainConfig& config) {
  AdamConfig a;
  a.learning_rate = config.learning_rate;
  a.beta1 = config.beta1;
  a.beta2 = config.beta2;
  a.epsilon = config.epsilon;
  return a;
}

}  // namespace

TrainCurve train_generator(GeneratorNet& net, const PatchDataset& dataset,
                           const TrainConfig& config) {
  require(dataset.size() > 0, ErrorCode::invalid_arg, "empty dataset");
  require(config.epochs >= 1 && config.batch_size >= 1, ErrorCode::invalid_arg,
          "epochs and batch size must be positive");
  const int patch = dataset.patch;
  const std::size_t patch_len = static_cast<std::size_t>(patch) * patch;
  for (const auto& in : dataset.inputs)
    require(in.size() == patch_len, ErrorCode::dimension, "patch size mismatch");

  AdamT<float> optimizer(adam_from(config));
  auto params = net.params();
  CounterRng shuffle_rng(CounterRng::derive(config.seed, 0x5155ull));

  TrainCurve curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto order = shuffled_indices(dataset.size(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t b = std::min<std::size_t>(config.batch_size, order.size() - start);
      Tensor input({static_cast<int>(b), 1, patch, patch});
      Tensor target({static_cast<int>(b), 1, patch, patch});
      for (std::size_t k = 0; k < b; ++k) {
        const auto& in = dataset.inputs[order[start + k]];
        const auto& lb = dataset.labels[order[start + k]];
        std::copy(in.begin(), in.end(), input.data.begin() + k * patch_len);
        std::copy(lb.begin(), lb.end(), target.data.begin() + k * patch_len);
      }
      for (auto& p : params) {
        p.tensor->ensure_grad();
        p.tensor->zero_grad();
      }
      Tensor pred = net.forward(input, true);
      Tensor grad(pred.shape);
      float loss = loss_generator(pred, target, static_cast<float>(config.alpha), &grad);
      net.backward(grad);
      optimizer.step(params);
      epoch_loss += loss;
      ++batches;
    }
    curve.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return curve;
}

TrainCurve train_pooling(PoolingNet& net, const PoolingDataset& dataset,
                         const TrainConfig& config) {
  return train_pooling_with_callback(net, dataset, config, nullptr);
}

TrainCurve train_pooling_with_callback(
    PoolingNet& net, const PoolingDataset& dataset, const TrainConfig& config,
    const std::function<void(int epoch, double loss)>& after_epoch) {
  require(!dataset.samples.empty(), ErrorCode::invalid_arg, "empty dataset");
  require(config.epochs >= 1 && config.batch_size >= 1, ErrorCode::invalid_arg,
          "epochs and batch size must be positive");
  const auto& first = dataset.samples.front();
  for (const auto& s : dataset.samples) {
    require(s.src.shape == first.src.shape && s.trans.shape == first.trans.shape,
            ErrorCode::dimension, "mismatched stack shapes in dataset");
  }
  const int ch_s = first.src.dim(0), h = first.src.dim(1), w = first.src.dim(2);
  const int ch_t = first.trans.dim(0);
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  AdamT<float> optimizer(adam_from(config));
  auto params = net.params();
  CounterRng shuffle_rng(CounterRng::derive(config.seed, 0x5156ull));

  TrainCurve curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto order = shuffled_indices(dataset.samples.size(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t b = std::min<std::size_t>(config.batch_size, order.size() - start);
      Tensor src({static_cast<int>(b), ch_s, h, w});
      Tensor trans({static_cast<int>(b), ch_t, h, w});
      std::vector<float> labels(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& s = dataset.samples[order[start + k]];
        std::copy(s.src.data.begin(), s.src.data.end(),
                  src.data.begin() + k * ch_s * plane);
        std::copy(s.trans.data.begin(), s.trans.data.end(),
                  trans.data.begin() + k * ch_t * plane);
        labels[k] = s.label;
      }
      for (auto& p : params) {
        p.tensor->ensure_grad();
        p.tensor->zero_grad();
      }
      Tensor scores = net.forward(src, trans, true);
      Tensor grad(scores.shape);
      float loss = loss_mse(scores, labels, 1.0f, &grad);
      net.backward(grad);
      optimizer.step(params);
      epoch_loss += loss;
      ++batches;
    }
    curve.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    if (after_epoch) after_epoch(epoch, curve.epoch_loss.back());
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Stacks and prediction

int stack_channels_src(const StackOptions&) { return 1; }

int stack_channels_trans(const StackOptions& options) {
  if (options.ablation == AblationMode::replace_transcoded_maps) return 1;
  return options.kind == StackKind::vmaf_style ? 2 : 1;
}

namespace {

QualityMap plane_as_map(const Plane& plane) {
  QualityMap map;
  map.width = plane.width;
  map.height = plane.height;
  map.metric = Metric::motion;  // untagged raw frame; range already [0,1]
  map.normalized = true;
  map.values = plane.data;
  return map;
}

Tensor maps_to_tensor(const std::vector<QualityMap>& maps) {
  const int c = static_cast<int>(maps.size());
  const int h = maps[0].height, w = maps[0].width;
  Tensor t({1, c, h, w});
  for (int i = 0; i < c; ++i)
    std::copy(maps[i].values.begin(), maps[i].values.end(),
              t.data.begin() + static_cast<std::size_t>(i) * h * w);
  return t;
}

}  // namespace

FrameStacks build_frame_stacks(const VideoClip& src, const VideoClip& dist, int frame,
                               GeneratorNet& generator, const StackOptions& options) {
  require(src.width() == dist.width() && src.height() == dist.height(),
          ErrorCode::dimension, "clip geometry mismatch");
  require(frame >= 0 && frame < src.frame_count() && frame < dist.frame_count(),
          ErrorCode::invalid_arg, "frame index out of range");

  std::vector<QualityMap> all;
  if (options.ablation == AblationMode::replace_source_maps) {
    all.push_back(plane_as_map(src.luma[frame]));
  } else {
    all.push_back(generator.infer_map(src.luma[frame]));
  }
  const std::size_t src_maps = all.size();

  if (options.ablation == AblationMode::replace_transcoded_maps) {
    all.push_back(plane_as_map(dist.luma[frame]));
  } else {
    auto trans = map_stack_frame(options.kind, src, dist, frame);
    for (auto& m : trans) all.push_back(std::move(m));
  }

  align_stack(all);
  if (options.downsample > 1)
    for (auto& m : all) m = downsample_map(m, options.downsample);

  FrameStacks stacks;
  stacks.src = maps_to_tensor({all.begin(), all.begin() + src_maps});
  stacks.trans = maps_to_tensor({all.begin() + src_maps, all.end()});
  return stacks;
}

double predict_score(const VideoClip& src, const VideoClip& dist,
                     GeneratorNet& generator, PoolingNet& pooling,
                     const StackOptions& options, int frame_count) {
  require(src.frame_count() == dist.frame_count(), ErrorCode::dimension,
          "clips have different frame counts");
  const int samples = std::min(frame_count, src.frame_count());
  auto indices = sample_frames_uniform(src.frame_count(), samples);
  double sum = 0.0;
  for (int idx : indices) {
    FrameStacks stacks = build_frame_stacks(src, dist, idx, generator, options);
    Tensor score = pooling.forward(stacks.src, stacks.trans, false);
    sum += score.data[0];
  }
  return sum / static_cast<double>(indices.size());
}

// ---------------------------------------------------------------------------
// Gradient verification at 64-bit precision

GradCheckReport gradient_check_generator(int depth, int width, int input_size,
                                         std::uint64_t seed) {
  GeneratorNetT<double> net(depth, width, seed);
  CounterRng rng(CounterRng::derive(seed, 0xC4ECull));

  TensorT<double> input({1, 1, input_size, input_size});
  TensorT<double> target({1, 1, input_size, input_size});
  for (auto& v : input.data) v = rng.next_unit();
  for (auto& v : target.data) v = rng.next_unit();

  auto params = net.params();
  std::vector<ParamRef<double>> tensors = params;
  tensors.push_back({"input", &input});

  auto eval = [&]() {
    TensorT<double> pred = net.forward(input, true);
    return loss_generator<double>(pred, target, 0.84);
  };
  auto eval_backward = [&]() {
    for (auto& p : params) {
      p.tensor->ensure_grad();
      p.tensor->zero_grad();
    }
    TensorT<double> pred = net.forward(input, true);
    TensorT<double> grad(pred.shape);
    double loss = loss_generator<double>(pred, target, 0.84, &grad);
    TensorT<double> gi = net.backward(grad);
    input.ensure_grad();
    input.grad = gi.data;
    return loss;
  };
  return finite_difference_check<double>(tensors, eval, eval_backward, 1e-5, 64);
}

GradCheckReport gradient_check_pooling(int in_src, int in_trans, int width,
                                       int input_size, std::uint64_t seed) {
  PoolingNetT<double> net(in_src, in_trans, width, seed);
  CounterRng rng(CounterRng::derive(seed, 0xC4EDull));

  TensorT<double> src({2, in_src, input_size, input_size});
  TensorT<double> trans({2, in_trans, input_size, input_size});
  for (auto& v : src.data) v = rng.next_unit();
  for (auto& v : trans.data) v = rng.next_unit();
  std::vector<double> labels = {rng.next_uniform(1.0, 5.0), rng.next_uniform(1.0, 5.0)};

  auto params = net.params();
  auto eval = [&]() {
    TensorT<double> scores = net.forward(src, trans, true);
    return loss_mse<double>(scores, labels, 1.0);
  };
  auto eval_backward = [&]() {
    for (auto& p : params) {
      p.tensor->ensure_grad();
      p.tensor->zero_grad();
    }
    TensorT<double> scores = net.forward(src, trans, true);
    TensorT<double> grad(scores.shape);
    double loss = loss_mse<double>(scores, labels, 1.0, &grad);
    net.backward(grad);
    return loss;
  };
  return finite_difference_check<double>(params, eval, eval_backward, 1e-5, 48);
}

}  // namespace uvqa
