#pragma once

#include <cstdint>

#include "gaze/nn/gazenet.hpp"
#include "gaze/nn/tensor.hpp"

namespace gaze::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a single tensor at step t (t >= 1).
template <typename T>
void adam_update(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& m, Tensor<T>& v, std::uint64_t t,
                 const AdamOptions& options);

template <typename T>
struct AdamState {
  GazeNetParams<T> m;
  GazeNetParams<T> v;
  std::uint64_t t = 0;  // completed steps
};

template <typename T>
AdamState<T> make_adam_state(const GazeNetParams<T>& params);

/// Advances state.t and updates every tensor.
template <typename T>
void adam_step(GazeNetParams<T>& params, const GazeNetParams<T>& grads, AdamState<T>& state,
               const AdamOptions& options = {});

}  // namespace gaze::nn
