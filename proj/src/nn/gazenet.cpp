#include "gaze/nn/gazenet.hpp"

#include <cmath>

#include "gaze/rng.hpp"

namespace gaze::nn {

namespace {

constexpr std::array<std::size_t, 5> kBaseChannels{96, 256, 384, 384, 256};
constexpr std::array<std::size_t, 2> kBaseFc{4096, 4096};

constexpr std::array<std::string_view, kParamCount> kParamNames{
    "conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias", "conv3.weight", "conv3.bias",
    "conv4.weight", "conv4.bias", "conv5.weight", "conv5.bias", "fc1.weight",   "fc1.bias",
    "fc2.weight",   "fc2.bias",   "fc3.weight",   "fc3.bias"};

Conv2dGeometry conv_geometry(const GazeNetShape& s, std::size_t i) { return {s.conv_stride[i], s.conv_padding[i]}; }

std::array<Shape, kParamCount> param_shapes(const GazeNetShape& s) {
  std::array<Shape, kParamCount> shapes;
  std::size_t in_c = 3;
  for (std::size_t i = 0; i < 5; ++i) {
    shapes[2 * i] = {s.conv_channels[i], in_c, s.conv_kernel[i], s.conv_kernel[i]};
    shapes[2 * i + 1] = {s.conv_channels[i]};
    in_c = s.conv_channels[i];
  }
  std::size_t in = s.fc1_in;
  for (std::size_t i = 0; i < 3; ++i) {
    shapes[kFc1W + 2 * i] = {s.fc_out[i], in};
    shapes[kFc1B + 2 * i] = {s.fc_out[i]};
    in = s.fc_out[i];
  }
  return shapes;
}

}  // namespace

std::string_view param_name(std::size_t id) { return kParamNames.at(id); }

std::size_t scaled_width(std::size_t base, double multiplier) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(base) * multiplier)));
}

GazeNetShape describe(const GazeNetConfig& config) {
  if (!(config.width_multiplier > 0.0) || config.width_multiplier > 1.0) {
    throw Error(ErrorCode::ShapeMismatch, "width_multiplier must lie in (0, 1]");
  }
  if (config.output_dim != 2) throw Error(ErrorCode::ShapeMismatch, "output_dim must be 2");
  if (config.bbox_feature_count < 0 || config.input_size < 1) {
    throw Error(ErrorCode::ShapeMismatch, "invalid input_size or bbox_feature_count");
  }
  GazeNetShape s;
  for (std::size_t i = 0; i < 5; ++i) s.conv_channels[i] = scaled_width(kBaseChannels[i], config.width_multiplier);
  std::size_t extent = static_cast<std::size_t>(config.input_size);
  std::size_t pool = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    extent = conv_output_size(extent, s.conv_kernel[i], s.conv_stride[i], s.conv_padding[i]);
    s.conv_out[i] = extent;
    if (i == 0 || i == 1 || i == 4) {
      extent = conv_output_size(extent, kPoolKernel, kPoolStride, 0);
      s.pool_out[pool++] = extent;
    }
  }
  s.flatten = s.conv_channels[4] * extent * extent;
  s.fc1_in = s.flatten + static_cast<std::size_t>(config.bbox_feature_count);
  s.fc_out = {scaled_width(kBaseFc[0], config.width_multiplier), scaled_width(kBaseFc[1], config.width_multiplier),
              static_cast<std::size_t>(config.output_dim)};
  return s;
}

template <typename T>
std::size_t GazeNetParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename T>
GazeNetParams<T> zero_params(const GazeNetConfig& config) {
  const auto shapes = param_shapes(describe(config));
  GazeNetParams<T> p;
  for (std::size_t i = 0; i < kParamCount; ++i) p.tensors[i] = Tensor<T>(shapes[i]);
  return p;
}

template <typename T>
GazeNetParams<T> zeros_like(const GazeNetParams<T>& params) {
  GazeNetParams<T> p;
  for (std::size_t i = 0; i < kParamCount; ++i) p.tensors[i] = Tensor<T>(params.tensors[i].shape());
  return p;
}

template <typename T>
GazeNetParams<T> init_params(const GazeNetConfig& config, std::uint64_t seed) {
  auto p = zero_params<T>(config);
  for (std::size_t i = 0; i < kParamCount; i += 2) {
    auto& w = p.tensors[i];
    const std::size_t fan_in = w.size() / w.dim(0);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, i));
    for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  return p;
}

template <typename T>
void check_params(const GazeNetParams<T>& params, const GazeNetConfig& config) {
  const auto shapes = param_shapes(describe(config));
  for (std::size_t i = 0; i < kParamCount; ++i) {
    require_shape(params.tensors[i].shape(), shapes[i], std::string(param_name(i)).c_str());
  }
}

template <typename T>
Tensor<T> forward_gazenet(const GazeNetParams<T>& params, const GazeNetConfig& config, const Tensor<T>& faces,
                          const Tensor<T>& bboxes, ForwardCache<T>* cache) {
  const auto s = describe(config);
  const auto in = static_cast<std::size_t>(config.input_size);
  if (faces.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "faces must be [B, 3, S, S]");
  const std::size_t batch = faces.dim(0);
  require_shape(faces.shape(), {batch, 3, in, in}, "faces");
  require_shape(bboxes.shape(), {batch, static_cast<std::size_t>(config.bbox_feature_count)}, "bboxes");

  const Tensor<T>* x = &faces;
  Tensor<T> act;
  Tensor<T> pooled;
  std::size_t pool = 0;
  std::array<Tensor<T>, 5> acts;
  std::array<Tensor<T>, 3> pools;
  std::array<std::vector<std::uint32_t>, 3> argmaxes;
  for (std::size_t i = 0; i < 5; ++i) {
    act = conv2d_forward(*x, params[2 * i], params[2 * i + 1], conv_geometry(s, i));
    for (auto& v : act.values()) v = v > T{0} ? v : T{0};
    if (i == 0 || i == 1 || i == 4) {
      auto r = maxpool_forward(act, kPoolKernel, kPoolStride);
      pools[pool] = std::move(r.output);
      argmaxes[pool] = std::move(r.argmax);
      acts[i] = std::move(act);
      x = &pools[pool++];
    } else {
      acts[i] = std::move(act);
      x = &acts[i];
    }
  }

  Tensor<T> fc_in({batch, s.fc1_in});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(pools[2].data() + b * s.flatten, s.flatten, fc_in.data() + b * s.fc1_in);
    std::copy_n(bboxes.data() + b * bboxes.dim(1), bboxes.dim(1), fc_in.data() + b * s.fc1_in + s.flatten);
  }
  auto h1 = relu_forward(dense_forward(fc_in, params[kFc1W], params[kFc1B]));
  auto h2 = relu_forward(dense_forward(h1, params[kFc2W], params[kFc2B]));
  auto out = dense_forward(h2, params[kFc3W], params[kFc3B]);

  if (cache) {
    cache->faces = faces;
    cache->conv_act = std::move(acts);
    cache->pool_out = std::move(pools);
    cache->pool_argmax = std::move(argmaxes);
    cache->fc_in = std::move(fc_in);
    cache->fc1_act = std::move(h1);
    cache->fc2_act = std::move(h2);
  }
  return out;
}

template <typename T>
GazeNetParams<T> backward_gazenet(const GazeNetParams<T>& params, const GazeNetConfig& config,
                                  const ForwardCache<T>& cache, const Tensor<T>& grad_output) {
  const auto s = describe(config);
  const std::size_t batch = cache.faces.dim(0);
  require_shape(grad_output.shape(), {batch, s.fc_out[2]}, "grad_output");
  GazeNetParams<T> grads;

  auto d3 = dense_backward(cache.fc2_act, params[kFc3W], grad_output);
  grads[kFc3W] = std::move(d3.weight);
  grads[kFc3B] = std::move(d3.bias);
  relu_backward_inplace(d3.input, cache.fc2_act);

  auto d2 = dense_backward(cache.fc1_act, params[kFc2W], d3.input);
  grads[kFc2W] = std::move(d2.weight);
  grads[kFc2B] = std::move(d2.bias);
  relu_backward_inplace(d2.input, cache.fc1_act);

  auto d1 = dense_backward(cache.fc_in, params[kFc1W], d2.input);
  grads[kFc1W] = std::move(d1.weight);
  grads[kFc1B] = std::move(d1.bias);

  // Drop the bbox columns; the rest is the gradient of the pooled conv5 map.
  Tensor<T> g(cache.pool_out[2].shape());
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(d1.input.data() + b * s.fc1_in, s.flatten, g.data() + b * s.flatten);
  }

  std::size_t pool = 2;
  for (std::size_t i = 5; i-- > 0;) {
    if (i == 0 || i == 1 || i == 4) {
      g = maxpool_backward(g, cache.pool_argmax[pool], cache.conv_act[i].shape());
      if (pool > 0) --pool;
    }
    relu_backward_inplace(g, cache.conv_act[i]);
    const Tensor<T>& conv_in = i == 0 ? cache.faces : (i == 1 ? cache.pool_out[0] : (i == 2 ? cache.pool_out[1] : cache.conv_act[i - 1]));
    auto dc = conv2d_backward(conv_in, params[2 * i], g, conv_geometry(s, i), i > 0);
    grads[2 * i] = std::move(dc.weight);
    grads[2 * i + 1] = std::move(dc.bias);
    if (i > 0) g = std::move(dc.input);
  }
  return grads;
}

#define GAZE_GAZENET_INSTANTIATE(T)                                                                              \
  template struct GazeNetParams<T>;                                                                              \
  template GazeNetParams<T> zero_params(const GazeNetConfig&);                                                   \
  template GazeNetParams<T> zeros_like(const GazeNetParams<T>&);                                                 \
  template GazeNetParams<T> init_params(const GazeNetConfig&, std::uint64_t);                                    \
  template void check_params(const GazeNetParams<T>&, const GazeNetConfig&);                                     \
  template Tensor<T> forward_gazenet(const GazeNetParams<T>&, const GazeNetConfig&, const Tensor<T>&,            \
                                     const Tensor<T>&, ForwardCache<T>*);                                        \
  template GazeNetParams<T> backward_gazenet(const GazeNetParams<T>&, const GazeNetConfig&, const ForwardCache<T>&, \
                                             const Tensor<T>&);

GAZE_GAZENET_INSTANTIATE(float)
GAZE_GAZENET_INSTANTIATE(double)

#undef GAZE_GAZENET_INSTANTIATE

}  // namespace gaze::nn
