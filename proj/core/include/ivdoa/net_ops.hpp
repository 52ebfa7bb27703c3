#pragma once

#include <cstdint>
#include <vector>

#include "ivdoa/tensor.hpp"

// Raw layer primitives of the CRNN. Each op comes with its exact
// reverse-mode counterpart; the gradient test suite checks every one of
// them against central finite differences in isolation.
namespace ivdoa::ops {

// Channel-major activation map, frame axis fastest.
struct Grid3 {
  std::size_t c = 0, b = 0, t = 0;
  std::vector<double> v;

  Grid3() = default;
  Grid3(std::size_t c_, std::size_t b_, std::size_t t_)
      : c(c_), b(b_), t(t_), v(c_ * b_ * t_, 0.0) {}
  double* row(std::size_t ci, std::size_t bi) { return v.data() + (ci * b + bi) * t; }
  const double* row(std::size_t ci, std::size_t bi) const {
    return v.data() + (ci * b + bi) * t;
  }
};

// 3x3 convolution, stride 1, zero padding, w shaped [oc][ic][3][3].
void conv3x3_forward(const Grid3& in, const Tensor& w, const Tensor& bias, Grid3& out);
void conv3x3_backward(const Grid3& in, const Tensor& w, const Grid3& d_out, Tensor& d_w,
                      Tensor& d_bias, Grid3& d_in);

// Per-channel batch normalization over the (band, frame) plane using
// batch statistics (training mode).
struct BnStats {
  std::vector<double> mean, var;
};
void batchnorm_train_forward(const Grid3& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Grid3& xhat, Grid3& out, BnStats& stats);
void batchnorm_train_backward(const Grid3& xhat, const BnStats& stats, const Tensor& gamma,
                              double eps, const Grid3& d_out, Tensor& d_gamma, Tensor& d_beta,
                              Grid3& d_in);
// Inference mode with frozen statistics.
void batchnorm_eval_forward(const Grid3& in, const Tensor& gamma, const Tensor& beta,
                            const std::vector<double>& mean, const std::vector<double>& var,
                            double eps, Grid3& out);

void tanh_forward(const Grid3& in, Grid3& out);
void tanh_backward(const Grid3& out, const Grid3& d_out, Grid3& d_in);

// Max-pool with kernel 2, stride 2 over bands only; frames untouched.
void maxpool_bands_forward(const Grid3& in, Grid3& out, std::vector<std::uint8_t>& argmax);
void maxpool_bands_backward(const Grid3& d_out, const std::vector<std::uint8_t>& argmax,
                            Grid3& d_in);

// Frame-wise dense layer: x is [frames][in] flat, y is [frames][out].
void dense_forward(const std::vector<double>& x, std::size_t frames, const Tensor& w,
                   const Tensor& bias, std::vector<double>& y);
void dense_backward(const std::vector<double>& x, std::size_t frames, const Tensor& w,
                    const std::vector<double>& d_y, Tensor& d_w, Tensor& d_bias,
                    std::vector<double>& d_x);

void sigmoid_forward(const std::vector<double>& in, std::vector<double>& out);
// d_in from the post-activation gradient and the activation value.
void sigmoid_backward(const std::vector<double>& out, const std::vector<double>& d_out,
                      std::vector<double>& d_in);

// One GRU direction over the frame axis; x is [frames][in] flat, weights
// carry the gates in r, z, n order:
//   r = sigmoid(W_ir x + b_ir + W_hr h' + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h' + b_hz)
//   n = tanh(W_in x + b_in + r . (W_hn h' + b_hn))
//   h = (1 - z) . n + z . h'
struct GruWeights {
  const Tensor* w_ih;
  const Tensor* w_hh;
  const Tensor* b_ih;
  const Tensor* b_hh;
};
struct GruGrads {
  Tensor* w_ih;
  Tensor* w_hh;
  Tensor* b_ih;
  Tensor* b_hh;
};
struct GruTrace {
  std::vector<double> r, z, n, h, hn;  // all [frames][hidden]
};
void gru_forward(const GruWeights& w, const std::vector<double>& x, std::size_t frames,
                 std::size_t in, std::size_t hidden, bool reverse, GruTrace& trace);
void gru_backward(const GruWeights& w, GruGrads& g, const std::vector<double>& x,
                  std::vector<double>& d_x, const GruTrace& trace, bool reverse,
                  const std::vector<double>& d_h, std::size_t frames, std::size_t in,
                  std::size_t hidden);

}  // namespace ivdoa::ops
