#include "gaze/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <numeric>

namespace gaze::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvDims {
  std::size_t n, c, h, w, o, k, oh, ow;
  std::size_t patch() const { return c * k * k; }
  std::size_t pixels() const { return oh * ow; }
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& input, const Tensor<T>& weight, Conv2dGeometry g) {
  if (input.rank() != 4 || weight.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "conv2d expects rank-4 tensors");
  if (weight.dim(1) != input.dim(1)) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d channel mismatch: input " + shape_string(input.shape()) +
                                              ", weight " + shape_string(weight.shape()));
  }
  if (weight.dim(2) != weight.dim(3)) throw Error(ErrorCode::ShapeMismatch, "conv2d kernels must be square");
  if (g.stride == 0) throw Error(ErrorCode::ShapeMismatch, "conv2d stride must be positive");
  const std::size_t k = weight.dim(2);
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), k,
          conv_output_size(input.dim(2), k, g.stride, g.padding), conv_output_size(input.dim(3), k, g.stride, g.padding)};
}

// One sample's receptive fields as a (C*K*K) x (OH*OW) matrix.
template <typename T>
void im2col(const T* in, const ConvDims& d, Conv2dGeometry g, T* col) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t c = 0; c < d.c; ++c) {
    const T* plane = in + c * d.h * d.w;
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        T* row = col + ((c * d.k + ki) * d.k + kj) * d.pixels();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - pad;
          T* dst = row + oy * d.ow;
          if (iy < 0 || iy >= static_cast<long>(d.h)) {
            std::fill(dst, dst + d.ow, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * d.w;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kj) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<long>(d.w)) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, Conv2dGeometry g, T* in) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t c = 0; c < d.c; ++c) {
    T* plane = in + c * d.h * d.w;
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const T* row = col + ((c * d.k + ki) * d.k + kj) * d.pixels();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - pad;
          if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * d.w;
          const T* src = row + oy * d.ow;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kj) - pad;
            if (ix >= 0 && ix < static_cast<long>(d.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0 || in + 2 * padding < kernel) {
    throw Error(ErrorCode::ShapeMismatch, "window of size " + std::to_string(kernel) + " does not fit input of size " +
                                              std::to_string(in) + " with padding " + std::to_string(padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Conv2dGeometry g) {
  const auto d = conv_dims(input, weight, g);
  require_shape(bias.shape(), {d.o}, "conv2d bias");
  Tensor<T> out({d.n, d.o, d.oh, d.ow});
  std::vector<T> col(d.patch() * d.pixels());
  ConstMapMat<T> w(weight.data(), static_cast<long>(d.o), static_cast<long>(d.patch()));
  ConstMapMat<T> colm(col.data(), static_cast<long>(d.patch()), static_cast<long>(d.pixels()));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), static_cast<long>(d.o));
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(input.data() + n * d.c * d.h * d.w, d, g, col.data());
    MapMat<T> o(out.data() + n * d.o * d.pixels(), static_cast<long>(d.o), static_cast<long>(d.pixels()));
    o.noalias() = w * colm;
    o.colwise() += b;
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_output,
                               Conv2dGeometry g, bool need_input_grad) {
  const auto d = conv_dims(input, weight, g);
  require_shape(grad_output.shape(), {d.n, d.o, d.oh, d.ow}, "conv2d grad_output");
  Conv2dGrads<T> grads{need_input_grad ? Tensor<T>(input.shape()) : Tensor<T>{}, Tensor<T>(weight.shape()),
                       Tensor<T>({d.o})};
  std::vector<T> col(d.patch() * d.pixels());
  std::vector<T> dcol(need_input_grad ? col.size() : 0);
  ConstMapMat<T> w(weight.data(), static_cast<long>(d.o), static_cast<long>(d.patch()));
  MapMat<T> dw(grads.weight.data(), static_cast<long>(d.o), static_cast<long>(d.patch()));
  ConstMapMat<T> colm(col.data(), static_cast<long>(d.patch()), static_cast<long>(d.pixels()));
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* in_n = input.data() + n * d.c * d.h * d.w;
    im2col(in_n, d, g, col.data());
    ConstMapMat<T> go(grad_output.data() + n * d.o * d.pixels(), static_cast<long>(d.o), static_cast<long>(d.pixels()));
    dw.noalias() += go * colm.transpose();
    // Plain loops: Eigen reductions depend on buffer alignment.
    for (std::size_t o = 0; o < d.o; ++o) {
      const T* row = grad_output.data() + (n * d.o + o) * d.pixels();
      grads.bias[o] += std::accumulate(row, row + d.pixels(), T{});
    }
    if (need_input_grad) {
      MapMat<T> dc(dcol.data(), static_cast<long>(d.patch()), static_cast<long>(d.pixels()));
      dc.noalias() = w.transpose() * go;
      col2im_add(dcol.data(), d, g, grads.input.data() + n * d.c * d.h * d.w);
    }
  }
  return grads;
}

template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, std::size_t kernel, std::size_t stride) {
  if (input.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "maxpool expects a rank-4 tensor");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = conv_output_size(h, kernel, stride, 0);
  const std::size_t ow = conv_output_size(w, kernel, stride, 0);
  MaxPoolResult<T> r{Tensor<T>({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_i = base + oy * stride * w + ox * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t i = base + (oy * stride + ky) * w + ox * stride + kx;
            if (input[i] > best) {
              best = input[i];
              best_i = i;
            }
          }
        }
        r.output[o] = best;
        r.argmax[o] = static_cast<std::uint32_t>(best_i);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& grad_output, const std::vector<std::uint32_t>& argmax,
                           const Shape& input_shape) {
  if (argmax.size() != grad_output.size()) throw Error(ErrorCode::ShapeMismatch, "maxpool argmax size mismatch");
  Tensor<T> grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
  return grad;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.values()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& activation) {
  require_shape(grad.shape(), activation.shape(), "relu backward");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > T{0})) grad[i] = T{0};
  }
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_output, const Tensor<T>& activation) {
  Tensor<T> g = grad_output;
  relu_backward_inplace(g, activation);
  return g;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || weight.dim(1) != x.dim(1)) {
    throw Error(ErrorCode::ShapeMismatch,
                "dense: input " + shape_string(x.shape()) + " vs weight " + shape_string(weight.shape()));
  }
  const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  require_shape(bias.shape(), {out}, "dense bias");
  Tensor<T> y({n, out});
  ConstMapMat<T> xm(x.data(), static_cast<long>(n), static_cast<long>(in));
  ConstMapMat<T> wm(weight.data(), static_cast<long>(out), static_cast<long>(in));
  MapMat<T> ym(y.data(), static_cast<long>(n), static_cast<long>(out));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), static_cast<long>(out));
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += b;
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_output) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  require_shape(grad_output.shape(), {n, out}, "dense grad_output");
  DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), Tensor<T>({out})};
  ConstMapMat<T> xm(x.data(), static_cast<long>(n), static_cast<long>(in));
  ConstMapMat<T> wm(weight.data(), static_cast<long>(out), static_cast<long>(in));
  ConstMapMat<T> gm(grad_output.data(), static_cast<long>(n), static_cast<long>(out));
  MapMat<T>(g.input.data(), static_cast<long>(n), static_cast<long>(in)).noalias() = gm * wm;
  MapMat<T>(g.weight.data(), static_cast<long>(out), static_cast<long>(in)).noalias() = gm.transpose() * xm;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < out; ++o) g.bias[o] += grad_output[r * out + o];
  return g;
}

template <typename T>
MseResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
  require_shape(truth.shape(), pred.shape(), "mse truth");
  if (pred.size() == 0) throw Error(ErrorCode::ShapeMismatch, "mse of empty tensors");
  MseResult<T> r{T{0}, Tensor<T>(pred.shape())};
  const T count = static_cast<T>(pred.size());
  // Accumulate in double so the float loss does not depend on batch order quirks.
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T diff = pred[i] - truth[i];
    sum += static_cast<double>(diff) * static_cast<double>(diff);
    r.grad[i] = T{2} * diff / count;
  }
  r.loss = static_cast<T>(sum / static_cast<double>(pred.size()));
  return r;
}

#define GAZE_NN_INSTANTIATE(T)                                                                                  \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dGeometry);      \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dGeometry, \
                                          bool);                                                                \
  template MaxPoolResult<T> maxpool_forward(const Tensor<T>&, std::size_t, std::size_t);                        \
  template Tensor<T> maxpool_backward(const Tensor<T>&, const std::vector<std::uint32_t>&, const Shape&);        \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                            \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                         \
  template void relu_backward_inplace(Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template MseResult<T> mse_loss(const Tensor<T>&, const Tensor<T>&);

GAZE_NN_INSTANTIATE(float)
GAZE_NN_INSTANTIATE(double)

#undef GAZE_NN_INSTANTIATE

}  // namespace gaze::nn
