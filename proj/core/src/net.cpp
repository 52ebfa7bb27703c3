#include "ivdoa/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ivdoa/net_ops.hpp"
#include "ivdoa/rng.hpp"

namespace ivdoa {

using ops::BnStats;
using ops::Grid3;

struct ForwardCache {
  NetMode mode = NetMode::Eval;
  NetConfig cfg;
  std::size_t frames = 0;
  std::array<Grid3, 3> block_in;
  std::array<Grid3, 3> bn_xhat;
  std::array<BnStats, 3> bn_stats;
  std::array<Grid3, 3> act_out;
  std::array<std::vector<std::uint8_t>, 3> pool_arg;
  std::array<std::vector<double>, 3> new_running_mean, new_running_var;
  std::vector<double> gru_x;  // [T][In]
  ops::GruTrace gru_f, gru_b;
  std::vector<double> bi;          // [T][2H]
  std::vector<double> riv_flat;    // [T][3B]
  std::vector<double> mask_post;   // [T][B]
  std::vector<double> sad_post;    // [T]
  bool valid = false;
};

void NetConfig::validate() const {
  if (in_channels == 0 || gru_hidden == 0) throw std::invalid_argument("NetConfig: zero sizes");
  if (bands == 0 || bands % 8 != 0)
    throw std::invalid_argument("NetConfig: bands must be a positive multiple of 8");
  for (const std::size_t c : conv_channels)
    if (c == 0) throw std::invalid_argument("NetConfig: zero conv channels");
}

NetworkParams NetworkParams::make(const NetConfig& cfg) {
  cfg.validate();
  NetworkParams p;
  p.cfg = cfg;
  std::size_t ic = cfg.in_channels;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t oc = cfg.conv_channels[k];
    p.blocks[k].w = Tensor::zeros({oc, ic, 3, 3});
    p.blocks[k].b = Tensor::zeros({oc});
    p.blocks[k].gamma = Tensor::zeros({oc});
    p.blocks[k].beta = Tensor::zeros({oc});
    for (double& g : p.blocks[k].gamma.v) g = 1.0;
    p.bn_running_mean[k] = Tensor::zeros({oc});
    p.bn_running_var[k] = Tensor::zeros({oc});
    for (double& v : p.bn_running_var[k].v) v = 1.0;
    ic = oc;
  }
  const std::size_t in = cfg.gru_input(), h = cfg.gru_hidden;
  for (GruDirParams* g : {&p.gru_fwd, &p.gru_bwd}) {
    g->w_ih = Tensor::zeros({3 * h, in});
    g->w_hh = Tensor::zeros({3 * h, h});
    g->b_ih = Tensor::zeros({3 * h});
    g->b_hh = Tensor::zeros({3 * h});
  }
  const std::size_t feat = cfg.feature_dim();
  p.head_riv.w = Tensor::zeros({3 * cfg.bands, feat});
  p.head_riv.b = Tensor::zeros({3 * cfg.bands});
  p.head_mask.w = Tensor::zeros({cfg.bands, feat});
  p.head_mask.b = Tensor::zeros({cfg.bands});
  p.head_sad.w = Tensor::zeros({1, feat});
  p.head_sad.b = Tensor::zeros({1});
  return p;
}

NetworkParams NetworkParams::init(const NetConfig& cfg, std::uint64_t seed) {
  NetworkParams p = make(cfg);
  std::size_t index = 0;
  p.for_each_tensor([&](const std::string& name, Tensor& t) {
    ++index;
    if (name.find(".b") != std::string::npos || name.find("beta") != std::string::npos ||
        name.find("gamma") != std::string::npos)
      return;  // biases stay zero, batchnorm affine starts at identity
    const std::size_t fan_in = t.size() / t.shape[0];
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng = Rng::fork(seed, "param", index);
    for (double& v : t.v) v = rng.uniform(-s, s);
  });
  return p;
}

NetworkParams NetworkParams::shape_clone_zeroed() const {
  NetworkParams p = make(cfg);
  // make() bakes in batchnorm identity defaults; a gradient or moment
  // container must start at exactly zero everywhere
  for (std::size_t k = 0; k < 3; ++k) {
    std::fill(p.blocks[k].gamma.v.begin(), p.blocks[k].gamma.v.end(), 0.0);
    std::fill(p.bn_running_var[k].v.begin(), p.bn_running_var[k].v.end(), 0.0);
  }
  return p;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

FeatureSet make_features(const SpectrogramSet& sp, const MelFilterbank& fb) {
  const std::size_t bands = fb.num_bands();
  const std::size_t frames = sp.num_frames();
  FeatureSet fs;
  fs.x.channels = 7;
  fs.x.bands = bands;
  fs.x.frames = frames;
  fs.x.layout = kFeatureLayout;
  fs.x.data.assign(7 * bands * frames, 0.0);

  const ComplexSpectrogram* chans[4] = {&sp.w, &sp.x, &sp.y, &sp.z};
  for (int c = 0; c < 4; ++c) {
    const auto lm = logmel(fb, power_spectrum(*chans[c]));
    for (std::size_t b = 0; b < bands; ++b)
      for (std::size_t t = 0; t < frames; ++t) fs.x.at(c, b, t) = lm[b][t];
  }
  fs.iv_mel_norm = normalize_iv(mel_compress_iv(fb, intensity_field(sp)));
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      const Vec3& v = fs.iv_mel_norm.iv[b][t];
      fs.x.at(4, b, t) = v.x;
      fs.x.at(5, b, t) = v.y;
      fs.x.at(6, b, t) = v.z;
    }
  }
  return fs;
}

ForwardResult forward(const NetworkParams& p, const FeatureTensor& x, NetMode mode) {
  const NetConfig& cfg = p.cfg;
  cfg.validate();
  if (x.channels != cfg.in_channels || x.bands != cfg.bands || x.frames == 0)
    throw std::invalid_argument("forward: feature tensor does not match the network input");
  if (x.data.size() != x.channels * x.bands * x.frames)
    throw std::invalid_argument("forward: feature tensor storage inconsistent");

  auto cache = std::make_shared<ForwardCache>();
  ForwardCache& cc = *cache;
  cc.mode = mode;
  cc.cfg = cfg;
  cc.frames = x.frames;
  const std::size_t frames = x.frames;

  Grid3 cur(cfg.in_channels, cfg.bands, frames);
  cur.v = x.data;

  for (std::size_t k = 0; k < 3; ++k) {
    cc.block_in[k] = cur;
    Grid3 conv;
    ops::conv3x3_forward(cur, p.blocks[k].w, p.blocks[k].b, conv);
    Grid3 bn_out;
    if (mode == NetMode::Train) {
      ops::batchnorm_train_forward(conv, p.blocks[k].gamma, p.blocks[k].beta, cfg.bn_eps,
                                   cc.bn_xhat[k], bn_out, cc.bn_stats[k]);
      cc.new_running_mean[k].resize(conv.c);
      cc.new_running_var[k].resize(conv.c);
      for (std::size_t c = 0; c < conv.c; ++c) {
        cc.new_running_mean[k][c] = cfg.bn_momentum * p.bn_running_mean[k].v[c] +
                                    (1.0 - cfg.bn_momentum) * cc.bn_stats[k].mean[c];
        cc.new_running_var[k][c] = cfg.bn_momentum * p.bn_running_var[k].v[c] +
                                   (1.0 - cfg.bn_momentum) * cc.bn_stats[k].var[c];
      }
    } else {
      ops::batchnorm_eval_forward(conv, p.blocks[k].gamma, p.blocks[k].beta,
                                  p.bn_running_mean[k].v, p.bn_running_var[k].v, cfg.bn_eps,
                                  bn_out);
    }
    ops::tanh_forward(bn_out, cc.act_out[k]);
    Grid3 pooled;
    ops::maxpool_bands_forward(cc.act_out[k], pooled, cc.pool_arg[k]);
    cur = std::move(pooled);
  }

  // flatten (channel, band) per frame for the recurrent stage
  const std::size_t in = cfg.gru_input(), h = cfg.gru_hidden;
  const std::size_t pb = cfg.pooled_bands();
  cc.gru_x.assign(frames * in, 0.0);
  for (std::size_t c = 0; c < cur.c; ++c)
    for (std::size_t b = 0; b < pb; ++b) {
      const double* src = cur.row(c, b);
      for (std::size_t t = 0; t < frames; ++t) cc.gru_x[t * in + c * pb + b] = src[t];
    }

  ops::gru_forward({&p.gru_fwd.w_ih, &p.gru_fwd.w_hh, &p.gru_fwd.b_ih, &p.gru_fwd.b_hh}, cc.gru_x,
                   frames, in, h, false, cc.gru_f);
  ops::gru_forward({&p.gru_bwd.w_ih, &p.gru_bwd.w_hh, &p.gru_bwd.b_ih, &p.gru_bwd.b_hh}, cc.gru_x,
                   frames, in, h, true, cc.gru_b);

  cc.bi.assign(frames * 2 * h, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    std::memcpy(&cc.bi[t * 2 * h], &cc.gru_f.h[t * h], h * sizeof(double));
    std::memcpy(&cc.bi[t * 2 * h + h], &cc.gru_b.h[t * h], h * sizeof(double));
  }

  const std::size_t bands = cfg.bands;
  std::vector<double> mask_pre, sad_pre;
  ops::dense_forward(cc.bi, frames, p.head_riv.w, p.head_riv.b, cc.riv_flat);
  ops::dense_forward(cc.bi, frames, p.head_mask.w, p.head_mask.b, mask_pre);
  ops::dense_forward(cc.bi, frames, p.head_sad.w, p.head_sad.b, sad_pre);
  ops::sigmoid_forward(mask_pre, cc.mask_post);
  ops::sigmoid_forward(sad_pre, cc.sad_post);

  NetOutputs out;
  out.riv.domain = BandDomain::Mel;
  out.riv.iv.assign(bands, std::vector<Vec3>(frames));
  out.mask.domain = BandDomain::Mel;
  out.mask.m.assign(bands, std::vector<double>(frames));
  out.sad = cc.sad_post;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* riv_t = &cc.riv_flat[t * 3 * bands];
    const double* mask_t = &cc.mask_post[t * bands];
    for (std::size_t b = 0; b < bands; ++b) {
      out.riv.iv[b][t] = {riv_t[b], riv_t[bands + b], riv_t[2 * bands + b]};
      out.mask.m[b][t] = mask_t[b];
    }
  }
  cc.valid = true;
  return {std::move(out), std::move(cache)};
}

void commit_running_stats(NetworkParams& p, const ForwardCache& cache) {
  if (!cache.valid || cache.mode != NetMode::Train)
    throw std::logic_error("commit_running_stats: needs a Train-mode forward cache");
  for (std::size_t k = 0; k < 3; ++k) {
    p.bn_running_mean[k].v = cache.new_running_mean[k];
    p.bn_running_var[k].v = cache.new_running_var[k];
  }
}

NetworkParams backward(const NetworkParams& p, const ForwardCache& cache, const OutputGrads& g) {
  if (!cache.valid) throw std::logic_error("backward: forward cache missing");
  if (cache.mode != NetMode::Train)
    throw std::logic_error("backward: cache was built in Eval mode");
  const NetConfig& cfg = p.cfg;
  const std::size_t frames = cache.frames, bands = cfg.bands, feat = cfg.feature_dim();
  if (g.d_riv.size() != 3 * bands * frames || g.d_mask.size() != bands * frames ||
      g.d_sad.size() != frames)
    throw std::invalid_argument("backward: output gradient shapes mismatch");

  NetworkParams grads = p.shape_clone_zeroed();

  // output grads arrive as [axis][band][t] / [band][t]; heads run in
  // frame-major order
  std::vector<double> d_riv_flat(frames * 3 * bands), d_mask_post(frames * bands);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t axis = 0; axis < 3; ++axis)
      for (std::size_t b = 0; b < bands; ++b)
        d_riv_flat[t * 3 * bands + axis * bands + b] = g.d_riv[(axis * bands + b) * frames + t];
    for (std::size_t b = 0; b < bands; ++b)
      d_mask_post[t * bands + b] = g.d_mask[b * frames + t];
  }
  std::vector<double> d_mask_pre, d_sad_pre;
  ops::sigmoid_backward(cache.mask_post, d_mask_post, d_mask_pre);
  ops::sigmoid_backward(cache.sad_post, g.d_sad, d_sad_pre);

  std::vector<double> d_bi(frames * feat, 0.0), d_tmp;
  ops::dense_backward(cache.bi, frames, p.head_riv.w, d_riv_flat, grads.head_riv.w,
                      grads.head_riv.b, d_tmp);
  for (std::size_t i = 0; i < d_bi.size(); ++i) d_bi[i] += d_tmp[i];
  ops::dense_backward(cache.bi, frames, p.head_mask.w, d_mask_pre, grads.head_mask.w,
                      grads.head_mask.b, d_tmp);
  for (std::size_t i = 0; i < d_bi.size(); ++i) d_bi[i] += d_tmp[i];
  ops::dense_backward(cache.bi, frames, p.head_sad.w, d_sad_pre, grads.head_sad.w,
                      grads.head_sad.b, d_tmp);
  for (std::size_t i = 0; i < d_bi.size(); ++i) d_bi[i] += d_tmp[i];

  const std::size_t h = cfg.gru_hidden, in = cfg.gru_input();
  std::vector<double> d_h_f(frames * h), d_h_b(frames * h);
  for (std::size_t t = 0; t < frames; ++t) {
    std::memcpy(&d_h_f[t * h], &d_bi[t * feat], h * sizeof(double));
    std::memcpy(&d_h_b[t * h], &d_bi[t * feat + h], h * sizeof(double));
  }
  std::vector<double> d_x(frames * in, 0.0);
  ops::GruGrads g_fwd{&grads.gru_fwd.w_ih, &grads.gru_fwd.w_hh, &grads.gru_fwd.b_ih,
                      &grads.gru_fwd.b_hh};
  ops::GruGrads g_bwd{&grads.gru_bwd.w_ih, &grads.gru_bwd.w_hh, &grads.gru_bwd.b_ih,
                      &grads.gru_bwd.b_hh};
  ops::gru_backward({&p.gru_fwd.w_ih, &p.gru_fwd.w_hh, &p.gru_fwd.b_ih, &p.gru_fwd.b_hh},
                    g_fwd, cache.gru_x, d_x, cache.gru_f, false, d_h_f, frames, in, h);
  ops::gru_backward({&p.gru_bwd.w_ih, &p.gru_bwd.w_hh, &p.gru_bwd.b_ih, &p.gru_bwd.b_hh},
                    g_bwd, cache.gru_x, d_x, cache.gru_b, true, d_h_b, frames, in, h);

  // un-flatten into the last pool grid
  const std::size_t pb = cfg.pooled_bands();
  Grid3 d_cur(cfg.conv_channels[2], pb, frames);
  for (std::size_t c = 0; c < d_cur.c; ++c)
    for (std::size_t b = 0; b < pb; ++b) {
      double* dst = d_cur.row(c, b);
      for (std::size_t t = 0; t < frames; ++t) dst[t] = d_x[t * in + c * pb + b];
    }

  for (std::size_t k = 3; k-- > 0;) {
    Grid3 d_act;
    ops::maxpool_bands_backward(d_cur, cache.pool_arg[k], d_act);
    Grid3 d_bn;
    ops::tanh_backward(cache.act_out[k], d_act, d_bn);
    Grid3 d_conv;
    ops::batchnorm_train_backward(cache.bn_xhat[k], cache.bn_stats[k], p.blocks[k].gamma,
                                  cfg.bn_eps, d_bn, grads.blocks[k].gamma, grads.blocks[k].beta,
                                  d_conv);
    Grid3 d_in;
    ops::conv3x3_backward(cache.block_in[k], p.blocks[k].w, d_conv, grads.blocks[k].w,
                          grads.blocks[k].b, d_in);
    d_cur = std::move(d_in);
  }
  return grads;
}

RefineResult refine_with_net(const IntensityField& iv_mel, const NetOutputs& out, double eps) {
  if (iv_mel.domain != BandDomain::Mel || out.riv.domain != BandDomain::Mel)
    throw std::invalid_argument("refine_with_net: fields must be mel-domain");
  const std::size_t bands = iv_mel.num_bands(), frames = iv_mel.num_frames();
  if (out.riv.num_bands() != bands || out.riv.num_frames() != frames ||
      out.mask.num_bands() != bands || out.mask.num_frames() != frames)
    throw std::invalid_argument("refine_with_net: shape mismatch");
  RefineResult res;
  res.frames.assign(frames, Vec3{});
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      Vec3 d = iv_mel.iv[b][t] - out.riv.iv[b][t];
      const double n = d.norm();
      if (n > 0.0) d = d * (1.0 / (n + eps));
      res.frames[t] = res.frames[t] + d * out.mask.m[b][t];
    }
  }
  return res;
}

void refine_backward(const IntensityField& iv_mel, const NetOutputs& out,
                     const std::vector<Vec3>& d_frames, OutputGrads& grads, double eps) {
  const std::size_t bands = iv_mel.num_bands(), frames = iv_mel.num_frames();
  grads.d_riv.assign(3 * bands * frames, 0.0);
  grads.d_mask.assign(bands * frames, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      const Vec3 d = iv_mel.iv[b][t] - out.riv.iv[b][t];
      const double n = d.norm();
      Vec3 unit{};
      if (n > 0.0) unit = d * (1.0 / (n + eps));
      const Vec3& df = d_frames[t];
      grads.d_mask[b * frames + t] = df.dot(unit);
      // through the normalization: J = I/(n+eps) - d d^T / (n (n+eps)^2)
      const Vec3 d_unit = df * out.mask.m[b][t];
      Vec3 d_diff{};
      if (n > 0.0) {
        const double inv = 1.0 / (n + eps);
        const double proj = d.dot(d_unit) / (n * (n + eps) * (n + eps));
        d_diff = d_unit * inv - d * proj;
      }
      grads.d_riv[(0 * bands + b) * frames + t] = -d_diff.x;
      grads.d_riv[(1 * bands + b) * frames + t] = -d_diff.y;
      grads.d_riv[(2 * bands + b) * frames + t] = -d_diff.z;
    }
  }
}

DoaTrack doa_track_from_frames(const std::vector<Vec3>& frames) {
  DoaTrack track;
  track.azimuth.resize(frames.size());
  track.elevation.resize(frames.size());
  track.degenerate.resize(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const DoaEstimate est = extract_doa(frames[t]);
    track.azimuth[t] = est.dir.azimuth;
    track.elevation[t] = est.dir.elevation;
    track.degenerate[t] = est.zero ? 1 : 0;
  }
  return track;
}

namespace {

double wrapped_abs_diff(double a, double b, double* d_db) {
  const double cands[3] = {a - b, a + 2.0 * kPi - b, a - 2.0 * kPi - b};
  double best = std::abs(cands[0]);
  double sign = cands[0] > 0.0 ? 1.0 : (cands[0] < 0.0 ? -1.0 : 0.0);
  for (int i = 1; i < 3; ++i) {
    if (std::abs(cands[i]) < best) {
      best = std::abs(cands[i]);
      sign = cands[i] > 0.0 ? 1.0 : (cands[i] < 0.0 ? -1.0 : 0.0);
    }
  }
  if (d_db) *d_db = -sign;
  return best;
}

}  // namespace

double doa_loss(const DoaTrack& gt, const DoaTrack& est, const std::vector<int>& z) {
  return doa_loss_grad(gt, est, z).loss;
}

DoaLossGrads doa_loss_grad(const DoaTrack& gt, const DoaTrack& est, const std::vector<int>& z) {
  if (gt.size() != est.size() || z.size() != gt.size())
    throw std::invalid_argument("doa_loss: track lengths differ");
  DoaLossGrads out;
  out.d_az.assign(est.size(), 0.0);
  out.d_el.assign(est.size(), 0.0);
  double zsum = 0.0;
  for (const int zi : z) zsum += zi ? 1.0 : 0.0;
  if (zsum == 0.0) return out;
  double acc = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (!z[t]) continue;
    const double d_el = gt.elevation[t] - est.elevation[t];
    acc += std::abs(d_el);
    out.d_el[t] = (d_el > 0.0 ? -1.0 : (d_el < 0.0 ? 1.0 : 0.0)) / zsum;
    double daz;
    acc += wrapped_abs_diff(gt.azimuth[t], est.azimuth[t], &daz);
    out.d_az[t] = daz / zsum;
  }
  out.loss = acc / zsum;
  return out;
}

double bce_loss(const std::vector<int>& z, const std::vector<double>& a) {
  if (z.size() != a.size()) throw std::invalid_argument("bce_loss: lengths differ");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double p = std::min(1.0 - kBceClamp, std::max(kBceClamp, a[t]));
    acc += z[t] ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / static_cast<double>(a.size());
}

std::vector<double> bce_grad(const std::vector<int>& z, const std::vector<double>& a) {
  std::vector<double> g(a.size(), 0.0);
  const double inv_t = a.empty() ? 0.0 : 1.0 / static_cast<double>(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t] < kBceClamp || a[t] > 1.0 - kBceClamp) continue;  // clamped flat
    g[t] = inv_t * (z[t] ? -1.0 / a[t] : 1.0 / (1.0 - a[t]));
  }
  return g;
}

double total_loss(const DoaTrack& gt, const DoaTrack& est, const std::vector<int>& z,
                  const std::vector<double>& sad_prob, double* loss_doa, double* loss_sad) {
  const double ldoa = doa_loss(gt, est, z);
  const double lsad = bce_loss(z, sad_prob);
  if (loss_doa) *loss_doa = ldoa;
  if (loss_sad) *loss_sad = lsad;
  return ldoa + lsad;
}

Vec3 doa_angle_grad(const Vec3& v, double d_az, double d_el) {
  const double p2 = v.x * v.x + v.y * v.y;
  Vec3 g{};
  if (p2 > 0.0) {
    g.x += d_az * (-v.y / p2);
    g.y += d_az * (v.x / p2);
    const double r = std::sqrt(p2);
    const double big_r2 = p2 + v.z * v.z;
    g.z += d_el * (r / big_r2);
    const double common = -v.z / (r * big_r2);
    g.x += d_el * common * v.x;
    g.y += d_el * common * v.y;
  }
  return g;
}

AdamState AdamState::make(const NetworkParams& p) {
  AdamState s;
  s.m = p.shape_clone_zeroed();
  s.v = p.shape_clone_zeroed();
  return s;
}

void adam_step(NetworkParams& p, const NetworkParams& grads, AdamState& state, double lr) {
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::vector<Tensor*> ps, ms, vs;
  std::vector<const Tensor*> gs;
  p.for_each_tensor([&](const std::string&, Tensor& t) { ps.push_back(&t); });
  grads.for_each_tensor([&](const std::string&, const Tensor& t) { gs.push_back(&t); });
  state.m.for_each_tensor([&](const std::string&, Tensor& t) { ms.push_back(&t); });
  state.v.for_each_tensor([&](const std::string&, Tensor& t) { vs.push_back(&t); });
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->size() != gs[i]->size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    for (std::size_t j = 0; j < ps[i]->size(); ++j) {
      const double g = gs[i]->v[j];
      double& m = ms[i]->v[j];
      double& v = vs[i]->v[j];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      ps[i]->v[j] -= lr * (m / c1) / (std::sqrt(v / c2) + state.cfg.eps);
    }
  }
}

double learning_rate(const LrSchedule& s, std::size_t epoch) {
  if (epoch <= s.flat_epochs) return s.lr0;
  const double floor_lr = s.lr0 / s.final_factor;
  if (epoch >= s.final_epoch) return floor_lr;
  const double frac = static_cast<double>(epoch - s.flat_epochs) /
                      static_cast<double>(s.final_epoch - s.flat_epochs);
  return s.lr0 * (1.0 - frac * (1.0 - 1.0 / s.final_factor));
}

Direction AugPattern::map_label(const Direction& d) const {
  double az = reflect ? -d.azimuth : d.azimuth;
  az += rot_quarters * (kPi / 2.0);
  double w = std::fmod(az + kPi, 2.0 * kPi);
  if (w <= 0.0) w += 2.0 * kPi;
  az = w - kPi;
  return {az, flip_elevation ? -d.elevation : d.elevation};
}

AugPattern aug_pattern(int id) {
  if (id < 0 || id >= kNumAugPatterns) throw std::invalid_argument("aug_pattern: id outside 0..15");
  AugPattern p;
  p.id = id;
  p.rot_quarters = id & 3;
  p.reflect = (id >> 2) & 1;
  p.flip_elevation = (id >> 3) & 1;

  // signed permutation M = Flip * Rot * Refl as integer entries
  int m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  if (p.reflect)
    for (int j = 0; j < 3; ++j) m[1][j] = -m[1][j];
  const int rc[4] = {1, 0, -1, 0};  // cos, sin of quarter turns
  const int rs[4] = {0, 1, 0, -1};
  const int c = rc[p.rot_quarters], s = rs[p.rot_quarters];
  int rot[3][3];
  for (int j = 0; j < 3; ++j) {
    rot[0][j] = c * m[0][j] - s * m[1][j];
    rot[1][j] = s * m[0][j] + c * m[1][j];
    rot[2][j] = m[2][j];
  }
  if (p.flip_elevation)
    for (int j = 0; j < 3; ++j) rot[2][j] = -rot[2][j];

  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (rot[i][j] != 0) {
        p.perm[i] = j;
        p.sign[i] = rot[i][j];
      }
    }
  }
  return p;
}

FoaSignal spatial_augment(const FoaSignal& sig, const AugPattern& p) {
  FoaSignal out;
  out.sample_rate = sig.sample_rate;
  out.channels[0] = sig.channels[0];
  for (int i = 0; i < 3; ++i) {
    out.channels[1 + i] = sig.channels[1 + p.perm[i]];
    if (p.sign[i] < 0.0)
      for (double& v : out.channels[1 + i]) v = -v;
  }
  return out;
}

SpectrogramSet spatial_augment(const SpectrogramSet& sp, const AugPattern& p) {
  SpectrogramSet out;
  out.w = sp.w;
  const ComplexSpectrogram* dip[3] = {&sp.x, &sp.y, &sp.z};
  ComplexSpectrogram* dst[3] = {&out.x, &out.y, &out.z};
  for (int i = 0; i < 3; ++i) {
    *dst[i] = *dip[p.perm[i]];
    if (p.sign[i] < 0.0)
      for (auto& row : dst[i]->bins)
        for (auto& v : row) v = -v;
  }
  return out;
}

FeatureTensor spatial_augment(const FeatureTensor& x, const AugPattern& p) {
  if (x.channels != 7)
    throw std::invalid_argument("spatial_augment: feature tensor must have 7 channels");
  FeatureTensor out = x;
  const std::size_t plane = x.bands * x.frames;
  // logmel W stays; logmel X,Y,Z permute without sign (powers)
  for (int i = 0; i < 3; ++i) {
    std::memcpy(&out.data[(1 + i) * plane], &x.data[(1 + p.perm[i]) * plane],
                plane * sizeof(double));
    const double* src = &x.data[(4 + p.perm[i]) * plane];
    double* dst = &out.data[(4 + i) * plane];
    for (std::size_t j = 0; j < plane; ++j) dst[j] = p.sign[i] * src[j];
  }
  return out;
}

IntensityField spatial_augment(const IntensityField& iv, const AugPattern& p) {
  IntensityField out = iv;
  for (auto& band : out.iv)
    for (Vec3& v : band) v = p.apply(v);
  return out;
}

DoaTrack spatial_augment(const DoaTrack& t, const AugPattern& p) {
  DoaTrack out = t;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Direction d = p.map_label({t.azimuth[i], t.elevation[i]});
    out.azimuth[i] = d.azimuth;
    out.elevation[i] = d.elevation;
  }
  return out;
}

}  // namespace ivdoa
