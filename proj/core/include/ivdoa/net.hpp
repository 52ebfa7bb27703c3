#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ivdoa/foa.hpp"
#include "ivdoa/tensor.hpp"
#include "ivdoa/tracks.hpp"

namespace ivdoa {

// Input feature stack: channels 0..3 are logmel of W, X, Y, Z, channels
// 4..6 the mel-compressed normalized IV (X, Y, Z). Layout [c][b][t] with
// t fastest.
struct FeatureTensor {
  std::size_t channels = 0;
  std::size_t bands = 0;
  std::size_t frames = 0;
  std::vector<double> data;
  std::string layout;

  double& at(std::size_t c, std::size_t b, std::size_t t) {
    return data[(c * bands + b) * frames + t];
  }
  double at(std::size_t c, std::size_t b, std::size_t t) const {
    return data[(c * bands + b) * frames + t];
  }
};

inline constexpr const char* kFeatureLayout = "logmel[W,X,Y,Z]+mel_iv_norm[X,Y,Z]";

struct FeatureSet {
  FeatureTensor x;
  IntensityField iv_mel_norm;  // identical to channels 4..6
};

FeatureSet make_features(const SpectrogramSet& sp, const MelFilterbank& fb);

// CRNN trunk: three conv blocks (3x3 conv, batchnorm, tanh, max-pool 2x
// over bands only), a bidirectional GRU over frames, and three dense
// heads. Pooling never touches the frame axis, so all heads are
// frame-aligned with the input.
struct NetConfig {
  std::size_t in_channels = 7;
  std::size_t bands = 96;
  std::array<std::size_t, 3> conv_channels = {16, 32, 32};
  std::size_t gru_hidden = 32;  // per direction
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  std::size_t pooled_bands() const { return bands / 8; }
  std::size_t gru_input() const { return conv_channels[2] * pooled_bands(); }
  std::size_t feature_dim() const { return 2 * gru_hidden; }

  void validate() const;  // bands must be divisible by 8, sizes positive
};

struct ConvBlockParams {
  Tensor w;      // [oc][ic][3][3]
  Tensor b;      // [oc]
  Tensor gamma;  // [oc]
  Tensor beta;   // [oc]
};

// Gate order r, z, n throughout.
struct GruDirParams {
  Tensor w_ih;  // [3H][In]
  Tensor w_hh;  // [3H][H]
  Tensor b_ih;  // [3H]
  Tensor b_hh;  // [3H]
};

struct DenseParams {
  Tensor w;  // [out][in]
  Tensor b;  // [out]
};

struct NetworkParams {
  NetConfig cfg;
  std::array<ConvBlockParams, 3> blocks;
  GruDirParams gru_fwd, gru_bwd;
  DenseParams head_riv;   // -> 3 * bands per frame
  DenseParams head_mask;  // -> bands per frame, sigmoid
  DenseParams head_sad;   // -> 1 per frame, sigmoid
  std::array<Tensor, 3> bn_running_mean;  // inference statistics
  std::array<Tensor, 3> bn_running_var;

  static NetworkParams make(const NetConfig& cfg);           // zero weights
  static NetworkParams init(const NetConfig& cfg, std::uint64_t seed);
  NetworkParams shape_clone_zeroed() const;
  std::size_t parameter_count() const;

  // Trainable tensors in a fixed, documented order.
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string p = "block" + std::to_string(k) + ".";
      f(p + "conv.w", blocks[k].w);
      f(p + "conv.b", blocks[k].b);
      f(p + "bn.gamma", blocks[k].gamma);
      f(p + "bn.beta", blocks[k].beta);
    }
    f("gru_fwd.w_ih", gru_fwd.w_ih);
    f("gru_fwd.w_hh", gru_fwd.w_hh);
    f("gru_fwd.b_ih", gru_fwd.b_ih);
    f("gru_fwd.b_hh", gru_fwd.b_hh);
    f("gru_bwd.w_ih", gru_bwd.w_ih);
    f("gru_bwd.w_hh", gru_bwd.w_hh);
    f("gru_bwd.b_ih", gru_bwd.b_ih);
    f("gru_bwd.b_hh", gru_bwd.b_hh);
    f("head_riv.w", head_riv.w);
    f("head_riv.b", head_riv.b);
    f("head_mask.w", head_mask.w);
    f("head_mask.b", head_mask.b);
    f("head_sad.w", head_sad.w);
    f("head_sad.b", head_sad.b);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<NetworkParams*>(this)->for_each_tensor(
        [&](const std::string& name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }
};

struct NetOutputs {
  IntensityField riv;        // mel domain, estimated reverberant IV
  MaskField mask;            // mel domain, sigmoid output in [0,1]
  std::vector<double> sad;   // per-frame activity probability
};

enum class NetMode { Train, Eval };

struct ForwardCache;  // internals shared with backward()

struct ForwardResult {
  NetOutputs out;
  std::shared_ptr<ForwardCache> cache;
};

// Deterministic; Eval mode uses the stored running statistics, Train mode
// uses batch statistics and reports updated running stats in the cache
// (commit_running_stats applies them). The cache is required by backward.
ForwardResult forward(const NetworkParams& p, const FeatureTensor& x, NetMode mode);

void commit_running_stats(NetworkParams& p, const ForwardCache& cache);

struct OutputGrads {
  std::vector<double> d_riv;   // [3][B][T] flat, t fastest
  std::vector<double> d_mask;  // [B][T] flat, w.r.t. post-sigmoid mask
  std::vector<double> d_sad;   // [T], w.r.t. post-sigmoid probability
};

// Exact reverse-mode gradients for every trainable tensor. Throws
// std::logic_error when the cache is missing or was built in Eval mode.
NetworkParams backward(const NetworkParams& p, const ForwardCache& cache,
                       const OutputGrads& g);

// Refinement: subtract the estimated reverberant IV, renormalize per
// band/frame, then take the mask-weighted band sum per frame.
struct RefineResult {
  std::vector<Vec3> frames;
};
RefineResult refine_with_net(const IntensityField& iv_mel, const NetOutputs& out,
                             double eps = 1e-12);

// d(loss)/d(frames) back to d(riv), d(mask). iv_mel is a constant input.
void refine_backward(const IntensityField& iv_mel, const NetOutputs& out,
                     const std::vector<Vec3>& d_frames, OutputGrads& grads,
                     double eps = 1e-12);

DoaTrack doa_track_from_frames(const std::vector<Vec3>& frames);

// Wrapped per-frame angular loss, averaged over active frames; 0 when no
// frame is active.
double doa_loss(const DoaTrack& gt, const DoaTrack& est, const std::vector<int>& z);

struct DoaLossGrads {
  double loss = 0.0;
  std::vector<double> d_az, d_el;  // w.r.t. the estimates
};
DoaLossGrads doa_loss_grad(const DoaTrack& gt, const DoaTrack& est,
                           const std::vector<int>& z);

inline constexpr double kBceClamp = 1e-7;

double bce_loss(const std::vector<int>& z, const std::vector<double>& a);
std::vector<double> bce_grad(const std::vector<int>& z, const std::vector<double>& a);

double total_loss(const DoaTrack& gt, const DoaTrack& est, const std::vector<int>& z,
                  const std::vector<double>& sad_prob, double* loss_doa = nullptr,
                  double* loss_sad = nullptr);

// Gradient of the per-frame DOA extraction (az = atan2(y,x),
// el = atan2(z, hypot(x,y))) w.r.t. the frame vector; zero at the
// degenerate points.
Vec3 doa_angle_grad(const Vec3& v, double d_az, double d_el);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  NetworkParams m, v;
  AdamConfig cfg;

  static AdamState make(const NetworkParams& p);
};

void adam_step(NetworkParams& p, const NetworkParams& grads, AdamState& state, double lr);

// Flat learning rate, then a linear ramp down to lr0/final_factor.
struct LrSchedule {
  double lr0 = 1e-3;
  std::size_t flat_epochs = 50;
  std::size_t final_epoch = 100;
  double final_factor = 100.0;
};
double learning_rate(const LrSchedule& s, std::size_t epoch);  // 1-based

// Signed channel permutation on (X, Y, Z) together with the matching
// label map. The 16 patterns are azimuth rotations {0,90,180,270} deg x
// azimuth reflection x elevation flip.
struct AugPattern {
  int id = 0;
  std::array<int, 3> perm = {0, 1, 2};
  std::array<double, 3> sign = {1.0, 1.0, 1.0};
  int rot_quarters = 0;
  bool reflect = false;
  bool flip_elevation = false;

  Direction map_label(const Direction& d) const;
  Vec3 apply(const Vec3& v) const {
    const double comp[3] = {v.x, v.y, v.z};
    return {sign[0] * comp[perm[0]], sign[1] * comp[perm[1]], sign[2] * comp[perm[2]]};
  }
};

inline constexpr int kNumAugPatterns = 16;

AugPattern aug_pattern(int id);  // throws std::invalid_argument outside 0..15

FoaSignal spatial_augment(const FoaSignal& sig, const AugPattern& p);
SpectrogramSet spatial_augment(const SpectrogramSet& sp, const AugPattern& p);
FeatureTensor spatial_augment(const FeatureTensor& x, const AugPattern& p);
IntensityField spatial_augment(const IntensityField& iv, const AugPattern& p);
DoaTrack spatial_augment(const DoaTrack& t, const AugPattern& p);

}  // namespace ivdoa
