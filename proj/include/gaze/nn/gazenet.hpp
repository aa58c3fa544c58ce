#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "gaze/facedet.hpp"
#include "gaze/nn/layers.hpp"
#include "gaze/nn/tensor.hpp"

namespace gaze::nn {

/// AlexNet convolution stack with the face-box features concatenated before
/// the fully connected head, regressing a 2D gaze point.
struct GazeNetConfig {
  double width_multiplier = 1.0;
  int input_size = kFaceCropSize;
  int bbox_feature_count = 4;
  int output_dim = 2;
  BBoxFeatureMode bbox_mode = BBoxFeatureMode::Normalized;

  friend bool operator==(const GazeNetConfig&, const GazeNetConfig&) = default;
};

/// Layer widths and spatial extents derived from a config.
struct GazeNetShape {
  std::array<std::size_t, 5> conv_channels{};
  std::array<std::size_t, 5> conv_kernel{11, 5, 3, 3, 3};
  std::array<std::size_t, 5> conv_stride{4, 1, 1, 1, 1};
  std::array<std::size_t, 5> conv_padding{0, 2, 1, 1, 1};
  std::array<std::size_t, 5> conv_out{};  // spatial size after each conv
  std::array<std::size_t, 3> pool_out{};  // after pool1, pool2, pool5
  std::size_t flatten = 0;                // conv5 channels x pool5 extent^2
  std::size_t fc1_in = 0;                 // flatten + bbox features
  std::array<std::size_t, 3> fc_out{};
};

inline constexpr std::size_t kPoolKernel = 3;
inline constexpr std::size_t kPoolStride = 2;

/// Throws ShapeMismatch when the input is too small for the stack or widths
/// are degenerate.
GazeNetShape describe(const GazeNetConfig& config);

std::size_t scaled_width(std::size_t base, double multiplier);

enum ParamId : std::size_t {
  kConv1W, kConv1B, kConv2W, kConv2B, kConv3W, kConv3B, kConv4W, kConv4B, kConv5W, kConv5B,
  kFc1W, kFc1B, kFc2W, kFc2B, kFc3W, kFc3B,
  kParamCount
};

std::string_view param_name(std::size_t id);

template <typename T>
struct GazeNetParams {
  std::array<Tensor<T>, kParamCount> tensors;

  Tensor<T>& operator[](std::size_t id) { return tensors[id]; }
  const Tensor<T>& operator[](std::size_t id) const { return tensors[id]; }

  std::size_t parameter_count() const;

  template <typename U>
  GazeNetParams<U> cast() const {
    GazeNetParams<U> out;
    for (std::size_t i = 0; i < kParamCount; ++i) out.tensors[i] = tensors[i].template cast<U>();
    return out;
  }

  friend bool operator==(const GazeNetParams&, const GazeNetParams&) = default;
};

template <typename T>
GazeNetParams<T> zero_params(const GazeNetConfig& config);

template <typename T>
GazeNetParams<T> zeros_like(const GazeNetParams<T>& params);

/// Kaiming-uniform (fan-in, relu gain) weights, zero biases.
template <typename T>
GazeNetParams<T> init_params(const GazeNetConfig& config, std::uint64_t seed);

/// Throws ShapeMismatch unless every tensor matches the config.
template <typename T>
void check_params(const GazeNetParams<T>& params, const GazeNetConfig& config);

/// Activations kept for the backward pass.
template <typename T>
struct ForwardCache {
  Tensor<T> faces;
  std::array<Tensor<T>, 5> conv_act;  // post-relu conv outputs
  std::array<Tensor<T>, 3> pool_out;
  std::array<std::vector<std::uint32_t>, 3> pool_argmax;
  Tensor<T> fc_in;  // flattened conv output ++ bbox features
  Tensor<T> fc1_act;
  Tensor<T> fc2_act;
};

/// faces [B, 3, S, S] in [0,1], bboxes [B, 4] -> gaze [B, 2] in cm.
template <typename T>
Tensor<T> forward_gazenet(const GazeNetParams<T>& params, const GazeNetConfig& config, const Tensor<T>& faces,
                          const Tensor<T>& bboxes, ForwardCache<T>* cache = nullptr);

/// Parameter gradients of sum(grad_output * output) given a populated cache.
template <typename T>
GazeNetParams<T> backward_gazenet(const GazeNetParams<T>& params, const GazeNetConfig& config,
                                  const ForwardCache<T>& cache, const Tensor<T>& grad_output);

}  // namespace gaze::nn
