#pragma once

#include <cstdint>
#include <vector>

#include "gaze/nn/tensor.hpp"

namespace gaze::nn {

/// floor((in + 2 pad - kernel) / stride) + 1; throws ShapeMismatch when < 1.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation. input [N, C, H, W], weight [O, C, K, K], bias [O].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dGeometry g);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_output,
                               Conv2dGeometry g, bool need_input_grad = true);

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// Unpadded max pooling; the first maximum in window scan order wins.
template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, std::size_t kernel, std::size_t stride);

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& grad_output, const std::vector<std::uint32_t>& argmax,
                           const Shape& input_shape);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

/// Gradient passes where the activation is strictly positive (subgradient 0 at 0).
/// `activation` may be either the relu input or its output.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_output, const Tensor<T>& activation);

template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& activation);

// x [N, in], weight [out, in], bias [out] -> [N, out].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_output);

template <typename T>
struct MseResult {
  T loss{};
  Tensor<T> grad;
};

/// Mean over every element of (pred - truth)^2, gradient 2 (pred - truth) / count.
template <typename T>
MseResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& truth);

}  // namespace gaze::nn
