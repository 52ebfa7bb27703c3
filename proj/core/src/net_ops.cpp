#include "ivdoa/net_ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ivdoa::ops {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Zero-padded copy with a one-cell border on bands and frames.
Grid3 pad1(const Grid3& in) {
  Grid3 out(in.c, in.b + 2, in.t + 2);
  for (std::size_t c = 0; c < in.c; ++c)
    for (std::size_t b = 0; b < in.b; ++b)
      std::memcpy(out.row(c, b + 1) + 1, in.row(c, b), in.t * sizeof(double));
  return out;
}

// y[o] += W[o][i] x[i]
void gemv_acc(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t o = 0; o < rows; ++o) {
    const double* wr = w + o * cols;
    double acc = 0.0;
    for (std::size_t i = 0; i < cols; ++i) acc += wr[i] * x[i];
    y[o] += acc;
  }
}

// y[i] += W[o][i]^T g[o]
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* y) {
  for (std::size_t o = 0; o < rows; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    const double* wr = w + o * cols;
    for (std::size_t i = 0; i < cols; ++i) y[i] += go * wr[i];
  }
}

// W[o][i] += g[o] x[i]
void outer_acc(double* w, std::size_t rows, std::size_t cols, const double* g, const double* x) {
  for (std::size_t o = 0; o < rows; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    double* wr = w + o * cols;
    for (std::size_t i = 0; i < cols; ++i) wr[i] += go * x[i];
  }
}

}  // namespace

void conv3x3_forward(const Grid3& in, const Tensor& w, const Tensor& bias, Grid3& out) {
  const std::size_t oc_n = w.shape[0], ic_n = w.shape[1];
  if (ic_n != in.c) throw std::invalid_argument("conv3x3: channel mismatch");
  out = Grid3(oc_n, in.b, in.t);
  const Grid3 padded = pad1(in);
  for (std::size_t oc = 0; oc < oc_n; ++oc) {
    for (std::size_t b = 0; b < in.b; ++b) {
      double* dst = out.row(oc, b);
      for (std::size_t t = 0; t < in.t; ++t) dst[t] = bias.v[oc];
    }
    for (std::size_t ic = 0; ic < ic_n; ++ic) {
      const double* wk = &w.v[(oc * ic_n + ic) * 9];
      for (int db = 0; db < 3; ++db) {
        for (int dt = 0; dt < 3; ++dt) {
          const double wv = wk[db * 3 + dt];
          if (wv == 0.0) continue;
          for (std::size_t b = 0; b < in.b; ++b) {
            const double* src = padded.row(ic, b + db) + dt;
            double* dst = out.row(oc, b);
            for (std::size_t t = 0; t < in.t; ++t) dst[t] += wv * src[t];
          }
        }
      }
    }
  }
}

void conv3x3_backward(const Grid3& in, const Tensor& w, const Grid3& d_out, Tensor& d_w,
                      Tensor& d_bias, Grid3& d_in) {
  const std::size_t oc_n = w.shape[0], ic_n = w.shape[1];
  const Grid3 padded = pad1(in);
  Grid3 d_padded(in.c, in.b + 2, in.t + 2);
  for (std::size_t oc = 0; oc < oc_n; ++oc) {
    double bsum = 0.0;
    for (std::size_t b = 0; b < in.b; ++b) {
      const double* g = d_out.row(oc, b);
      for (std::size_t t = 0; t < in.t; ++t) bsum += g[t];
    }
    d_bias.v[oc] += bsum;
    for (std::size_t ic = 0; ic < ic_n; ++ic) {
      double* dwk = &d_w.v[(oc * ic_n + ic) * 9];
      const double* wk = &w.v[(oc * ic_n + ic) * 9];
      for (int db = 0; db < 3; ++db) {
        for (int dt = 0; dt < 3; ++dt) {
          const double wv = wk[db * 3 + dt];
          double acc = 0.0;
          for (std::size_t b = 0; b < in.b; ++b) {
            const double* src = padded.row(ic, b + db) + dt;
            double* dsrc = d_padded.row(ic, b + db) + dt;
            const double* g = d_out.row(oc, b);
            for (std::size_t t = 0; t < in.t; ++t) {
              acc += g[t] * src[t];
              dsrc[t] += wv * g[t];
            }
          }
          dwk[db * 3 + dt] += acc;
        }
      }
    }
  }
  d_in = Grid3(in.c, in.b, in.t);
  for (std::size_t c = 0; c < in.c; ++c)
    for (std::size_t b = 0; b < in.b; ++b)
      std::memcpy(d_in.row(c, b), d_padded.row(c, b + 1) + 1, in.t * sizeof(double));
}

void batchnorm_train_forward(const Grid3& in, const Tensor& gamma, const Tensor& beta,
                             double eps, Grid3& xhat, Grid3& out, BnStats& stats) {
  const double n_cells = static_cast<double>(in.b * in.t);
  stats.mean.assign(in.c, 0.0);
  stats.var.assign(in.c, 0.0);
  xhat = Grid3(in.c, in.b, in.t);
  out = Grid3(in.c, in.b, in.t);
  for (std::size_t c = 0; c < in.c; ++c) {
    double s = 0.0;
    for (std::size_t b = 0; b < in.b; ++b) {
      const double* row = in.row(c, b);
      for (std::size_t t = 0; t < in.t; ++t) s += row[t];
    }
    const double mean = s / n_cells;
    double sq = 0.0;
    for (std::size_t b = 0; b < in.b; ++b) {
      const double* row = in.row(c, b);
      for (std::size_t t = 0; t < in.t; ++t) sq += (row[t] - mean) * (row[t] - mean);
    }
    const double var = sq / n_cells;
    stats.mean[c] = mean;
    stats.var[c] = var;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t b = 0; b < in.b; ++b) {
      const double* src = in.row(c, b);
      double* xh = xhat.row(c, b);
      double* dst = out.row(c, b);
      for (std::size_t t = 0; t < in.t; ++t) {
        xh[t] = (src[t] - mean) * inv_std;
        dst[t] = gamma.v[c] * xh[t] + beta.v[c];
      }
    }
  }
}

void batchnorm_train_backward(const Grid3& xhat, const BnStats& stats, const Tensor& gamma,
                              double eps, const Grid3& d_out, Tensor& d_gamma, Tensor& d_beta,
                              Grid3& d_in) {
  const double n_cells = static_cast<double>(xhat.b * xhat.t);
  d_in = Grid3(xhat.c, xhat.b, xhat.t);
  for (std::size_t c = 0; c < xhat.c; ++c) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < xhat.b; ++b) {
      const double* dy = d_out.row(c, b);
      const double* xh = xhat.row(c, b);
      for (std::size_t t = 0; t < xhat.t; ++t) {
        s1 += dy[t];
        s2 += dy[t] * xh[t];
      }
    }
    d_beta.v[c] += s1;
    d_gamma.v[c] += s2;
    const double inv_std = 1.0 / std::sqrt(stats.var[c] + eps);
    const double mean_dy = s1 / n_cells;
    const double mean_dyxh = s2 / n_cells;
    for (std::size_t b = 0; b < xhat.b; ++b) {
      const double* dy = d_out.row(c, b);
      const double* xh = xhat.row(c, b);
      double* dx = d_in.row(c, b);
      for (std::size_t t = 0; t < xhat.t; ++t)
        dx[t] = gamma.v[c] * inv_std * (dy[t] - mean_dy - xh[t] * mean_dyxh);
    }
  }
}

void batchnorm_eval_forward(const Grid3& in, const Tensor& gamma, const Tensor& beta,
                            const std::vector<double>& mean, const std::vector<double>& var,
                            double eps, Grid3& out) {
  out = Grid3(in.c, in.b, in.t);
  for (std::size_t c = 0; c < in.c; ++c) {
    const double inv_std = 1.0 / std::sqrt(var[c] + eps);
    for (std::size_t b = 0; b < in.b; ++b) {
      const double* src = in.row(c, b);
      double* dst = out.row(c, b);
      for (std::size_t t = 0; t < in.t; ++t)
        dst[t] = gamma.v[c] * (src[t] - mean[c]) * inv_std + beta.v[c];
    }
  }
}

void tanh_forward(const Grid3& in, Grid3& out) {
  out = Grid3(in.c, in.b, in.t);
  for (std::size_t i = 0; i < in.v.size(); ++i) out.v[i] = std::tanh(in.v[i]);
}

void tanh_backward(const Grid3& out, const Grid3& d_out, Grid3& d_in) {
  d_in = Grid3(out.c, out.b, out.t);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    d_in.v[i] = d_out.v[i] * (1.0 - out.v[i] * out.v[i]);
}

void maxpool_bands_forward(const Grid3& in, Grid3& out, std::vector<std::uint8_t>& argmax) {
  if (in.b % 2 != 0) throw std::invalid_argument("maxpool: band count must be even");
  out = Grid3(in.c, in.b / 2, in.t);
  argmax.assign(in.c * (in.b / 2) * in.t, 0);
  for (std::size_t c = 0; c < in.c; ++c) {
    for (std::size_t b = 0; b < in.b / 2; ++b) {
      const double* lo = in.row(c, 2 * b);
      const double* hi = in.row(c, 2 * b + 1);
      double* dst = out.row(c, b);
      std::uint8_t* arg = &argmax[(c * (in.b / 2) + b) * in.t];
      for (std::size_t t = 0; t < in.t; ++t) {
        if (hi[t] > lo[t]) {
          dst[t] = hi[t];
          arg[t] = 1;
        } else {
          dst[t] = lo[t];
        }
      }
    }
  }
}

void maxpool_bands_backward(const Grid3& d_out, const std::vector<std::uint8_t>& argmax,
                            Grid3& d_in) {
  d_in = Grid3(d_out.c, d_out.b * 2, d_out.t);
  for (std::size_t c = 0; c < d_out.c; ++c) {
    for (std::size_t b = 0; b < d_out.b; ++b) {
      const double* g = d_out.row(c, b);
      const std::uint8_t* arg = &argmax[(c * d_out.b + b) * d_out.t];
      double* lo = d_in.row(c, 2 * b);
      double* hi = d_in.row(c, 2 * b + 1);
      for (std::size_t t = 0; t < d_out.t; ++t) (arg[t] ? hi : lo)[t] = g[t];
    }
  }
}

void dense_forward(const std::vector<double>& x, std::size_t frames, const Tensor& w,
                   const Tensor& bias, std::vector<double>& y) {
  const std::size_t out_n = w.shape[0], in_n = w.shape[1];
  y.assign(frames * out_n, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    double* yt = &y[t * out_n];
    for (std::size_t o = 0; o < out_n; ++o) yt[o] = bias.v[o];
    gemv_acc(w.v.data(), out_n, in_n, &x[t * in_n], yt);
  }
}

void dense_backward(const std::vector<double>& x, std::size_t frames, const Tensor& w,
                    const std::vector<double>& d_y, Tensor& d_w, Tensor& d_bias,
                    std::vector<double>& d_x) {
  const std::size_t out_n = w.shape[0], in_n = w.shape[1];
  d_x.assign(frames * in_n, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* gy = &d_y[t * out_n];
    const double* xt = &x[t * in_n];
    outer_acc(d_w.v.data(), out_n, in_n, gy, xt);
    for (std::size_t o = 0; o < out_n; ++o) d_bias.v[o] += gy[o];
    gemv_t_acc(w.v.data(), out_n, in_n, gy, &d_x[t * in_n]);
  }
}

void sigmoid_forward(const std::vector<double>& in, std::vector<double>& out) {
  out.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = sigmoid(in[i]);
}

void sigmoid_backward(const std::vector<double>& out, const std::vector<double>& d_out,
                      std::vector<double>& d_in) {
  d_in.resize(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) d_in[i] = d_out[i] * out[i] * (1.0 - out[i]);
}

void gru_forward(const GruWeights& w, const std::vector<double>& x, std::size_t frames,
                 std::size_t in, std::size_t hidden, bool reverse, GruTrace& trace) {
  const std::size_t h = hidden;
  trace.r.assign(frames * h, 0.0);
  trace.z.assign(frames * h, 0.0);
  trace.n.assign(frames * h, 0.0);
  trace.h.assign(frames * h, 0.0);
  trace.hn.assign(frames * h, 0.0);
  std::vector<double> h_prev(h, 0.0);
  std::vector<double> gates(3 * h), hgates(3 * h);
  for (std::size_t step = 0; step < frames; ++step) {
    const std::size_t t = reverse ? frames - 1 - step : step;
    const double* xt = x.data() + t * in;
    for (std::size_t i = 0; i < 3 * h; ++i) gates[i] = w.b_ih->v[i];
    gemv_acc(w.w_ih->v.data(), 3 * h, in, xt, gates.data());
    for (std::size_t i = 0; i < 3 * h; ++i) hgates[i] = w.b_hh->v[i];
    gemv_acc(w.w_hh->v.data(), 3 * h, h, h_prev.data(), hgates.data());
    double* rt = &trace.r[t * h];
    double* zt = &trace.z[t * h];
    double* nt = &trace.n[t * h];
    double* ht = &trace.h[t * h];
    double* hnt = &trace.hn[t * h];
    for (std::size_t i = 0; i < h; ++i) {
      rt[i] = sigmoid(gates[i] + hgates[i]);
      zt[i] = sigmoid(gates[h + i] + hgates[h + i]);
      hnt[i] = hgates[2 * h + i];
      nt[i] = std::tanh(gates[2 * h + i] + rt[i] * hnt[i]);
      ht[i] = (1.0 - zt[i]) * nt[i] + zt[i] * h_prev[i];
    }
    std::memcpy(h_prev.data(), ht, h * sizeof(double));
  }
}

void gru_backward(const GruWeights& w, GruGrads& g, const std::vector<double>& x,
                  std::vector<double>& d_x, const GruTrace& trace, bool reverse,
                  const std::vector<double>& d_h, std::size_t frames, std::size_t in,
                  std::size_t hidden) {
  const std::size_t h = hidden;
  std::vector<double> d_h_carry(h, 0.0);
  std::vector<double> zeros(h, 0.0);
  std::vector<double> dr_pre(h), dz_pre(h), dn_pre(h), d_hn(h);
  for (std::size_t step = frames; step-- > 0;) {
    const std::size_t t = reverse ? frames - 1 - step : step;
    const double* h_prev;
    if (reverse)
      h_prev = (t + 1 < frames) ? &trace.h[(t + 1) * h] : zeros.data();
    else
      h_prev = (t > 0) ? &trace.h[(t - 1) * h] : zeros.data();
    const double* rt = &trace.r[t * h];
    const double* zt = &trace.z[t * h];
    const double* nt = &trace.n[t * h];
    const double* hnt = &trace.hn[t * h];
    const double* xt = x.data() + t * in;

    for (std::size_t i = 0; i < h; ++i) {
      const double dh = d_h[t * h + i] + d_h_carry[i];
      const double dz = dh * (h_prev[i] - nt[i]);
      const double dn = dh * (1.0 - zt[i]);
      d_h_carry[i] = dh * zt[i];
      dn_pre[i] = dn * (1.0 - nt[i] * nt[i]);
      const double dr = dn_pre[i] * hnt[i];
      d_hn[i] = dn_pre[i] * rt[i];
      dz_pre[i] = dz * zt[i] * (1.0 - zt[i]);
      dr_pre[i] = dr * rt[i] * (1.0 - rt[i]);
    }
    outer_acc(g.w_ih->v.data(), h, in, dr_pre.data(), xt);
    outer_acc(g.w_ih->v.data() + h * in, h, in, dz_pre.data(), xt);
    outer_acc(g.w_ih->v.data() + 2 * h * in, h, in, dn_pre.data(), xt);
    outer_acc(g.w_hh->v.data(), h, h, dr_pre.data(), h_prev);
    outer_acc(g.w_hh->v.data() + h * h, h, h, dz_pre.data(), h_prev);
    outer_acc(g.w_hh->v.data() + 2 * h * h, h, h, d_hn.data(), h_prev);
    for (std::size_t i = 0; i < h; ++i) {
      g.b_ih->v[i] += dr_pre[i];
      g.b_ih->v[h + i] += dz_pre[i];
      g.b_ih->v[2 * h + i] += dn_pre[i];
      g.b_hh->v[i] += dr_pre[i];
      g.b_hh->v[h + i] += dz_pre[i];
      g.b_hh->v[2 * h + i] += d_hn[i];
    }
    double* dxt = d_x.data() + t * in;
    gemv_t_acc(w.w_ih->v.data(), h, in, dr_pre.data(), dxt);
    gemv_t_acc(w.w_ih->v.data() + h * in, h, in, dz_pre.data(), dxt);
    gemv_t_acc(w.w_ih->v.data() + 2 * h * in, h, in, dn_pre.data(), dxt);
    gemv_t_acc(w.w_hh->v.data(), h, h, dr_pre.data(), d_h_carry.data());
    gemv_t_acc(w.w_hh->v.data() + h * h, h, h, dz_pre.data(), d_h_carry.data());
    gemv_t_acc(w.w_hh->v.data() + 2 * h * h, h, h, d_hn.data(), d_h_carry.data());
  }
}

}  // namespace ivdoa::ops
