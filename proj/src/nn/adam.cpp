#include "gaze/nn/adam.hpp"

#include <cmath>

namespace gaze::nn {

template <typename T>
void adam_update(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& m, Tensor<T>& v, std::uint64_t t,
                 const AdamOptions& o) {
  require_shape(grad.shape(), param.shape(), "adam grad");
  require_shape(m.shape(), param.shape(), "adam first moment");
  require_shape(v.shape(), param.shape(), "adam second moment");
  if (t == 0) throw Error(ErrorCode::InvalidArgument, "adam step index starts at 1");
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T{1} - b1) * g;
    v[i] = b2 * v[i] + (T{1} - b2) * g * g;
    const double m_hat = static_cast<double>(m[i]) / bc1;
    const double v_hat = static_cast<double>(v[i]) / bc2;
    param[i] = static_cast<T>(static_cast<double>(param[i]) - o.lr * m_hat / (std::sqrt(v_hat) + o.eps));
  }
}

template <typename T>
AdamState<T> make_adam_state(const GazeNetParams<T>& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

template <typename T>
void adam_step(GazeNetParams<T>& params, const GazeNetParams<T>& grads, AdamState<T>& state,
               const AdamOptions& options) {
  ++state.t;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    adam_update(params[i], grads[i], state.m[i], state.v[i], state.t, options);
  }
}

template void adam_update(Tensor<float>&, const Tensor<float>&, Tensor<float>&, Tensor<float>&, std::uint64_t,
                          const AdamOptions&);
template void adam_update(Tensor<double>&, const Tensor<double>&, Tensor<double>&, Tensor<double>&, std::uint64_t,
                          const AdamOptions&);
template AdamState<float> make_adam_state(const GazeNetParams<float>&);
template AdamState<double> make_adam_state(const GazeNetParams<double>&);
template void adam_step(GazeNetParams<float>&, const GazeNetParams<float>&, AdamState<float>&, const AdamOptions&);
template void adam_step(GazeNetParams<double>&, const GazeNetParams<double>&, AdamState<double>&,
                        const AdamOptions&);

}  // namespace gaze::nn
