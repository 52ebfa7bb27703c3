#include "ivdoa/trainer.hpp"

#include <cmath>
#include <limits>

#include "ivdoa/pipeline.hpp"
#include "ivdoa/rng.hpp"

namespace ivdoa {

namespace {

struct LossEval {
  StepResult stats;
  OutputGrads out_grads;
  ForwardResult fwd;
};

// Forward in Train mode through refinement, extraction and both loss
// terms; fills the gradients w.r.t. the three network outputs.
LossEval forward_loss(const NetworkParams& p, const TrainSample& s, bool want_grads) {
  LossEval ev;
  ev.fwd = forward(p, s.features, NetMode::Train);
  const NetOutputs& out = ev.fwd.out;

  const RefineResult refined = refine_with_net(s.iv_mel_norm, out);
  const DoaTrack est = doa_track_from_frames(refined.frames);

  const DoaLossGrads doa = doa_loss_grad(s.gt, est, s.z);
  const double lsad = bce_loss(s.z, out.sad);
  ev.stats.loss_doa = doa.loss;
  ev.stats.loss_sad = lsad;
  ev.stats.loss = doa.loss + lsad;
  if (!want_grads) return ev;

  std::vector<Vec3> d_frames(refined.frames.size());
  for (std::size_t t = 0; t < refined.frames.size(); ++t)
    d_frames[t] = doa_angle_grad(refined.frames[t], doa.d_az[t], doa.d_el[t]);
  refine_backward(s.iv_mel_norm, out, d_frames, ev.out_grads);
  ev.out_grads.d_sad = bce_grad(s.z, out.sad);
  return ev;
}

}  // namespace

StepResult train_step(NetworkParams& p, AdamState& adam, const TrainSample& s, double lr) {
  LossEval ev = forward_loss(p, s, true);
  const NetworkParams grads = backward(p, *ev.fwd.cache, ev.out_grads);
  adam_step(p, grads, adam, lr);
  commit_running_stats(p, *ev.fwd.cache);
  return ev.stats;
}

StepResult evaluate_loss(const NetworkParams& p, const TrainSample& s) {
  return forward_loss(p, s, false).stats;
}

NetworkParams loss_gradients(const NetworkParams& p, const TrainSample& s, StepResult* stats) {
  LossEval ev = forward_loss(p, s, true);
  if (stats) *stats = ev.stats;
  return backward(p, *ev.fwd.cache, ev.out_grads);
}

double validation_de_deg(const NetworkParams& p, const std::vector<TrainSample>& val) {
  double acc = 0.0;
  std::size_t counted = 0;
  for (const auto& s : val) {
    bool any_active = false;
    for (const int z : s.z) any_active |= z != 0;
    if (!any_active) continue;
    const ForwardResult fwd = forward(p, s.features, NetMode::Eval);
    const RefineResult refined = refine_with_net(s.iv_mel_norm, fwd.out);
    const DoaTrack est = doa_track_from_frames(refined.frames);
    acc += doa_error_deg(est, s.gt, s.z);
    ++counted;
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : acc / static_cast<double>(counted);
}

std::vector<EpochStats> train_network(NetworkParams& p, const std::vector<TrainSample>& train,
                                      const std::vector<TrainSample>& val,
                                      const TrainOptions& opt,
                                      const std::function<void(const EpochStats&)>& on_epoch) {
  AdamState adam = AdamState::make(p);
  std::vector<EpochStats> log;
  log.reserve(opt.epochs);
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    const double lr = learning_rate(opt.schedule, epoch);
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    for (std::size_t i = 0; i < train.size(); ++i) {
      StepResult r;
      if (opt.augment) {
        Rng rng = Rng::fork(opt.seed, "augment", (epoch - 1) * train.size() + i);
        const AugPattern pat = aug_pattern(static_cast<int>(rng.uniform_index(kNumAugPatterns)));
        TrainSample s;
        s.features = spatial_augment(train[i].features, pat);
        s.iv_mel_norm = spatial_augment(train[i].iv_mel_norm, pat);
        s.gt = spatial_augment(train[i].gt, pat);
        s.z = train[i].z;
        r = train_step(p, adam, s, lr);
      } else {
        r = train_step(p, adam, train[i], lr);
      }
      stats.loss += r.loss;
      stats.loss_doa += r.loss_doa;
      stats.loss_sad += r.loss_sad;
    }
    const double n = train.empty() ? 1.0 : static_cast<double>(train.size());
    stats.loss /= n;
    stats.loss_doa /= n;
    stats.loss_sad /= n;
    stats.val_de_deg = validation_de_deg(p, val);
    log.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return log;
}

}  // namespace ivdoa
