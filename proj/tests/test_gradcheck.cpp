#include <doctest.h>

#include <cmath>
#include <functional>

#include "ivdoa/net.hpp"
#include "ivdoa/net_ops.hpp"
#include "ivdoa/rng.hpp"
#include "ivdoa/trainer.hpp"

using namespace ivdoa;
using ivdoa::ops::Grid3;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Central finite difference of a scalar closure w.r.t. one coordinate.
double fd(const std::function<double()>& f, double& coord) {
  const double keep = coord;
  coord = keep + kStep;
  const double hi = f();
  coord = keep - kStep;
  const double lo = f();
  coord = keep;
  return (hi - lo) / (2.0 * kStep);
}

// A coordinate passes on relative error, or on an absolute floor that
// covers central-difference rounding noise (the loss itself is O(1)).
bool grad_matches(double analytic, double numeric) {
  return rel_err(analytic, numeric) < kTol || std::abs(analytic - numeric) < 1e-6;
}

void check_all(const std::function<double()>& f, std::vector<double>& coords,
               const std::vector<double>& analytic) {
  REQUIRE(coords.size() == analytic.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double numeric = fd(f, coords[i]);
    CHECK_MESSAGE(grad_matches(analytic[i], numeric),
                  "coord " << i << ": analytic " << analytic[i] << " numeric " << numeric);
  }
}

Grid3 random_grid(std::size_t c, std::size_t b, std::size_t t, Rng& rng) {
  Grid3 g(c, b, t);
  for (double& v : g.v) v = rng.normal();
  return g;
}

double weighted_sum(const std::vector<double>& v, const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * c[i];
  return s;
}

}  // namespace

TEST_CASE("conv3x3 gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(100 + trial);
    Grid3 in = random_grid(2, 4, 5, rng);
    Tensor w = Tensor::zeros({3, 2, 3, 3});
    Tensor bias = Tensor::zeros({3});
    for (double& v : w.v) v = rng.normal();
    for (double& v : bias.v) v = rng.normal();
    std::vector<double> proj(3 * 4 * 5);
    for (double& v : proj) v = rng.normal();

    auto loss = [&] {
      Grid3 out;
      ops::conv3x3_forward(in, w, bias, out);
      return weighted_sum(out.v, proj);
    };

    Grid3 d_out(3, 4, 5);
    d_out.v = proj;
    Tensor d_w = Tensor::zeros(w.shape), d_b = Tensor::zeros(bias.shape);
    Grid3 d_in;
    ops::conv3x3_backward(in, w, d_out, d_w, d_b, d_in);

    check_all(loss, w.v, d_w.v);
    check_all(loss, bias.v, d_b.v);
    check_all(loss, in.v, d_in.v);
  }
}

TEST_CASE("batchnorm training-mode gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(200 + trial);
    Grid3 in = random_grid(3, 4, 4, rng);
    Tensor gamma = Tensor::zeros({3}), beta = Tensor::zeros({3});
    for (double& v : gamma.v) v = 0.5 + rng.uniform();
    for (double& v : beta.v) v = rng.normal();
    std::vector<double> proj(3 * 4 * 4);
    for (double& v : proj) v = rng.normal();
    const double eps = 1e-5;

    auto loss = [&] {
      Grid3 xhat, out;
      ops::BnStats stats;
      ops::batchnorm_train_forward(in, gamma, beta, eps, xhat, out, stats);
      return weighted_sum(out.v, proj);
    };

    Grid3 xhat, out;
    ops::BnStats stats;
    ops::batchnorm_train_forward(in, gamma, beta, eps, xhat, out, stats);
    Grid3 d_out(3, 4, 4);
    d_out.v = proj;
    Tensor d_gamma = Tensor::zeros({3}), d_beta = Tensor::zeros({3});
    Grid3 d_in;
    ops::batchnorm_train_backward(xhat, stats, gamma, eps, d_out, d_gamma, d_beta, d_in);

    check_all(loss, gamma.v, d_gamma.v);
    check_all(loss, beta.v, d_beta.v);
    check_all(loss, in.v, d_in.v);
  }
}

TEST_CASE("tanh and maxpool gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(300 + trial);
    Grid3 in = random_grid(2, 6, 3, rng);
    std::vector<double> proj_tanh(2 * 6 * 3), proj_pool(2 * 3 * 3);
    for (double& v : proj_tanh) v = rng.normal();
    for (double& v : proj_pool) v = rng.normal();

    auto loss_tanh = [&] {
      Grid3 out;
      ops::tanh_forward(in, out);
      return weighted_sum(out.v, proj_tanh);
    };
    Grid3 out;
    ops::tanh_forward(in, out);
    Grid3 d_out(2, 6, 3);
    d_out.v = proj_tanh;
    Grid3 d_in;
    ops::tanh_backward(out, d_out, d_in);
    check_all(loss_tanh, in.v, d_in.v);

    auto loss_pool = [&] {
      Grid3 pooled;
      std::vector<std::uint8_t> arg;
      ops::maxpool_bands_forward(in, pooled, arg);
      return weighted_sum(pooled.v, proj_pool);
    };
    Grid3 pooled;
    std::vector<std::uint8_t> arg;
    ops::maxpool_bands_forward(in, pooled, arg);
    Grid3 d_pool(2, 3, 3);
    d_pool.v = proj_pool;
    Grid3 d_in_pool;
    ops::maxpool_bands_backward(d_pool, arg, d_in_pool);
    check_all(loss_pool, in.v, d_in_pool.v);
  }
}

TEST_CASE("dense and sigmoid gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(400 + trial);
    const std::size_t frames = 4, in_n = 3, out_n = 5;
    std::vector<double> x(frames * in_n);
    for (double& v : x) v = rng.normal();
    Tensor w = Tensor::zeros({out_n, in_n}), bias = Tensor::zeros({out_n});
    for (double& v : w.v) v = rng.normal();
    for (double& v : bias.v) v = rng.normal();
    std::vector<double> proj(frames * out_n);
    for (double& v : proj) v = rng.normal();

    auto loss = [&] {
      std::vector<double> y, sig;
      ops::dense_forward(x, frames, w, bias, y);
      ops::sigmoid_forward(y, sig);
      return weighted_sum(sig, proj);
    };

    std::vector<double> y, sig;
    ops::dense_forward(x, frames, w, bias, y);
    ops::sigmoid_forward(y, sig);
    std::vector<double> d_pre;
    ops::sigmoid_backward(sig, proj, d_pre);
    Tensor d_w = Tensor::zeros(w.shape), d_b = Tensor::zeros(bias.shape);
    std::vector<double> d_x;
    ops::dense_backward(x, frames, w, d_pre, d_w, d_b, d_x);

    check_all(loss, w.v, d_w.v);
    check_all(loss, bias.v, d_b.v);
    check_all(loss, x, d_x);
  }
}

TEST_CASE("GRU gradients match finite differences in both directions") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(500 + trial);
    const std::size_t frames = 4, in_n = 3, h = 2;
    const bool reverse = trial % 2 == 1;
    std::vector<double> x(frames * in_n);
    for (double& v : x) v = rng.normal();
    Tensor w_ih = Tensor::zeros({3 * h, in_n}), w_hh = Tensor::zeros({3 * h, h});
    Tensor b_ih = Tensor::zeros({3 * h}), b_hh = Tensor::zeros({3 * h});
    for (Tensor* t : {&w_ih, &w_hh, &b_ih, &b_hh})
      for (double& v : t->v) v = rng.normal();
    std::vector<double> proj(frames * h);
    for (double& v : proj) v = rng.normal();

    const ops::GruWeights weights{&w_ih, &w_hh, &b_ih, &b_hh};
    auto loss = [&] {
      ops::GruTrace trace;
      ops::gru_forward(weights, x, frames, in_n, h, reverse, trace);
      return weighted_sum(trace.h, proj);
    };

    ops::GruTrace trace;
    ops::gru_forward(weights, x, frames, in_n, h, reverse, trace);
    Tensor dw_ih = Tensor::zeros(w_ih.shape), dw_hh = Tensor::zeros(w_hh.shape);
    Tensor db_ih = Tensor::zeros(b_ih.shape), db_hh = Tensor::zeros(b_hh.shape);
    ops::GruGrads grads{&dw_ih, &dw_hh, &db_ih, &db_hh};
    std::vector<double> d_x(frames * in_n, 0.0);
    ops::gru_backward(weights, grads, x, d_x, trace, reverse, proj, frames, in_n, h);

    check_all(loss, w_ih.v, dw_ih.v);
    check_all(loss, w_hh.v, dw_hh.v);
    check_all(loss, b_ih.v, db_ih.v);
    check_all(loss, b_hh.v, db_hh.v);
    check_all(loss, x, d_x);
  }
}

TEST_CASE("refinement gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(600 + trial);
    const std::size_t bands = 3, frames = 4;
    IntensityField iv;
    iv.domain = BandDomain::Mel;
    iv.iv.assign(bands, std::vector<Vec3>(frames));
    for (auto& row : iv.iv)
      for (Vec3& v : row) v = {rng.normal(), rng.normal(), rng.normal()};

    NetOutputs out;
    out.riv.domain = BandDomain::Mel;
    out.riv.iv.assign(bands, std::vector<Vec3>(frames));
    out.mask.domain = BandDomain::Mel;
    out.mask.m.assign(bands, std::vector<double>(frames));
    for (std::size_t b = 0; b < bands; ++b)
      for (std::size_t t = 0; t < frames; ++t) {
        out.riv.iv[b][t] = {0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal()};
        out.mask.m[b][t] = 0.2 + 0.6 * rng.uniform();
      }

    std::vector<Vec3> proj(frames);
    for (Vec3& v : proj) v = {rng.normal(), rng.normal(), rng.normal()};

    auto loss = [&] {
      const RefineResult r = refine_with_net(iv, out);
      double s = 0.0;
      for (std::size_t t = 0; t < frames; ++t) s += r.frames[t].dot(proj[t]);
      return s;
    };

    OutputGrads grads;
    refine_backward(iv, out, proj, grads);

    for (std::size_t b = 0; b < bands; ++b) {
      for (std::size_t t = 0; t < frames; ++t) {
        for (int axis = 0; axis < 3; ++axis) {
          double& coord = axis == 0 ? out.riv.iv[b][t].x
                                    : (axis == 1 ? out.riv.iv[b][t].y : out.riv.iv[b][t].z);
          const double numeric = fd(loss, coord);
          const double analytic =
              grads.d_riv[(static_cast<std::size_t>(axis) * bands + b) * frames + t];
          CHECK_MESSAGE(grad_matches(analytic, numeric),
                        "riv axis " << axis << " band " << b << " frame " << t);
        }
        const double numeric = fd(loss, out.mask.m[b][t]);
        CHECK(grad_matches(grads.d_mask[b * frames + t], numeric));
      }
    }
  }
}

TEST_CASE("DOA extraction angle gradients match finite differences") {
  Rng rng(700);
  for (int trial = 0; trial < 10; ++trial) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    while (std::sqrt(v.x * v.x + v.y * v.y) < 0.1)
      v = {rng.normal(), rng.normal(), rng.normal()};
    const double d_az = rng.normal(), d_el = rng.normal();
    auto loss = [&] {
      const DoaEstimate e = extract_doa(v);
      return d_az * e.dir.azimuth + d_el * e.dir.elevation;
    };
    const Vec3 g = doa_angle_grad(v, d_az, d_el);
    CHECK(grad_matches(g.x, fd(loss, v.x)));
    CHECK(grad_matches(g.y, fd(loss, v.y)));
    CHECK(grad_matches(g.z, fd(loss, v.z)));
  }
}

TEST_CASE("DOA and BCE loss gradients match finite differences") {
  Rng rng(800);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t frames = 6;
    DoaTrack gt, est;
    std::vector<int> z;
    std::vector<double> prob;
    for (std::size_t t = 0; t < frames; ++t) {
      gt.azimuth.push_back(rng.uniform(-kPi, kPi));
      gt.elevation.push_back(rng.uniform(-kPi / 2, kPi / 2));
      est.azimuth.push_back(rng.uniform(-kPi, kPi));
      est.elevation.push_back(rng.uniform(-kPi / 2, kPi / 2));
      z.push_back(t == 0 ? 1 : (rng.uniform() < 0.6 ? 1 : 0));
      prob.push_back(0.05 + 0.9 * rng.uniform());
    }
    const DoaLossGrads g = doa_loss_grad(gt, est, z);
    auto loss_doa = [&] { return doa_loss(gt, est, z); };
    for (std::size_t t = 0; t < frames; ++t) {
      const double num_az = fd(loss_doa, est.azimuth[t]);
      const double num_el = fd(loss_doa, est.elevation[t]);
      CHECK(grad_matches(g.d_az[t], num_az));
      CHECK(grad_matches(g.d_el[t], num_el));
    }

    const auto bg = bce_grad(z, prob);
    auto loss_bce = [&] { return bce_loss(z, prob); };
    for (std::size_t t = 0; t < frames; ++t)
      CHECK(grad_matches(bg[t], fd(loss_bce, prob[t])));
  }
}

TEST_CASE("gradients vanish at a zero-loss point") {
  Rng rng(850);
  DoaTrack gt;
  std::vector<int> z;
  for (int t = 0; t < 5; ++t) {
    gt.azimuth.push_back(rng.uniform(-kPi, kPi));
    gt.elevation.push_back(rng.uniform(-kPi / 2, kPi / 2));
    gt.degenerate.push_back(0);
    z.push_back(t % 2 == 0 ? 1 : 0);
  }
  const DoaLossGrads g = doa_loss_grad(gt, gt, z);
  CHECK(g.loss == 0.0);
  for (std::size_t t = 0; t < gt.size(); ++t) {
    CHECK(g.d_az[t] == 0.0);
    CHECK(g.d_el[t] == 0.0);
  }

  // SAD head at the exact labels: the gradient w.r.t. the sigmoid logit
  // a(1-a) * dBCE/da collapses to roughly a - z, which is zero here
  const std::vector<double> a{1.0 - kBceClamp, kBceClamp, 1.0 - kBceClamp};
  const std::vector<int> labels{1, 0, 1};
  const auto bg = bce_grad(labels, a);
  for (std::size_t t = 0; t < a.size(); ++t)
    CHECK(std::abs(bg[t] * a[t] * (1.0 - a[t])) < 1e-6);
}

TEST_CASE("single dense layer with squared error recovers the closed-form gradient") {
  Rng rng(900);
  const std::size_t frames = 3, in_n = 4, out_n = 2;
  std::vector<double> x(frames * in_n);
  for (double& v : x) v = rng.normal();
  Tensor w = Tensor::zeros({out_n, in_n}), bias = Tensor::zeros({out_n});
  for (double& v : w.v) v = rng.normal();
  std::vector<double> target(frames * out_n);
  for (double& v : target) v = rng.normal();

  std::vector<double> y;
  ops::dense_forward(x, frames, w, bias, y);
  std::vector<double> delta(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) delta[i] = y[i] - target[i];

  Tensor d_w = Tensor::zeros(w.shape), d_b = Tensor::zeros(bias.shape);
  std::vector<double> d_x;
  ops::dense_backward(x, frames, w, delta, d_w, d_b, d_x);

  // closed form: dW = sum_t delta_t x_t^T
  for (std::size_t o = 0; o < out_n; ++o)
    for (std::size_t i = 0; i < in_n; ++i) {
      double expect = 0.0;
      for (std::size_t t = 0; t < frames; ++t) expect += delta[t * out_n + o] * x[t * in_n + i];
      CHECK(d_w.v[o * in_n + i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("composed pipeline gradients match finite differences on a tiny net") {
  NetConfig cfg;
  cfg.bands = 8;
  cfg.conv_channels = {2, 3, 3};
  cfg.gru_hidden = 2;

  Rng rng(1000);
  TrainSample s;
  s.features.channels = 7;
  s.features.bands = cfg.bands;
  s.features.frames = 5;
  s.features.layout = kFeatureLayout;
  s.features.data.resize(7 * cfg.bands * 5);
  for (double& v : s.features.data) v = rng.normal();
  s.iv_mel_norm.domain = BandDomain::Mel;
  s.iv_mel_norm.iv.assign(cfg.bands, std::vector<Vec3>(5));
  for (auto& row : s.iv_mel_norm.iv)
    for (Vec3& v : row) {
      v = {rng.normal(), rng.normal(), rng.normal()};
      v = v * (1.0 / (v.norm() + 1e-12));
    }
  for (std::size_t t = 0; t < 5; ++t) {
    s.gt.azimuth.push_back(rng.uniform(-2.0, 2.0));
    s.gt.elevation.push_back(rng.uniform(-1.0, 1.0));
    s.gt.degenerate.push_back(0);
    s.z.push_back(t < 3 ? 1 : 0);
  }

  NetworkParams p = NetworkParams::init(cfg, 77);
  const NetworkParams analytic = loss_gradients(p, s);

  auto loss = [&] { return evaluate_loss(p, s).loss; };

  std::vector<std::pair<std::string, double>> worst;
  std::size_t checked = 0, failures = 0;
  p.for_each_tensor([&](const std::string& name, Tensor& t) {
    const Tensor* g = nullptr;
    analytic.for_each_tensor([&](const std::string& gname, const Tensor& gt_tensor) {
      if (gname == name) g = &gt_tensor;
    });
    REQUIRE(g != nullptr);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double numeric = fd(loss, t.v[i]);
      const double analytic_v = g->v[i];
      // skip coordinates with no influence at all
      if (std::abs(numeric) < 1e-12 && std::abs(analytic_v) < 1e-12) continue;
      ++checked;
      if (!grad_matches(analytic_v, numeric)) {
        ++failures;
        if (worst.size() < 5) worst.emplace_back(name + "[" + std::to_string(i) + "]", numeric);
      }
    }
  });
  CHECK(checked > 500);
  CHECK_MESSAGE(failures == 0, "first failing coords: " << (worst.empty() ? "-" : worst[0].first));
}
