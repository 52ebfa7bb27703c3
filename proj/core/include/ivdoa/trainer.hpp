#pragma once

#include <functional>
#include <vector>

#include "ivdoa/net.hpp"

namespace ivdoa {

struct TrainSample {
  FeatureTensor features;
  IntensityField iv_mel_norm;
  DoaTrack gt;
  std::vector<int> z;
};

struct TrainOptions {
  std::size_t epochs = 100;
  LrSchedule schedule;
  bool augment = false;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;      // mean over recordings
  double loss_doa = 0.0;
  double loss_sad = 0.0;
  double val_de_deg = 0.0;  // NaN when no validation set
};

struct StepResult {
  double loss = 0.0, loss_doa = 0.0, loss_sad = 0.0;
};

// One forward/backward/ADAM update on a single recording (batch = one
// recording). Commits batchnorm running statistics.
StepResult train_step(NetworkParams& p, AdamState& adam, const TrainSample& s, double lr);

// Loss only, Train-mode forward, no update. Used by gradient checks.
StepResult evaluate_loss(const NetworkParams& p, const TrainSample& s);

// Full analytic gradients of the composed loss (features -> network ->
// refinement -> extraction -> losses) w.r.t. every trainable tensor.
NetworkParams loss_gradients(const NetworkParams& p, const TrainSample& s,
                             StepResult* stats = nullptr);

// Mean per-recording DOA error of the current net over gt-active frames,
// Eval-mode forward. Recordings with no active frame are skipped.
double validation_de_deg(const NetworkParams& p, const std::vector<TrainSample>& val);

// Deterministic single-threaded trainer; augmentation draws one of the 16
// patterns per (epoch, recording) from the seeded stream.
std::vector<EpochStats> train_network(NetworkParams& p, const std::vector<TrainSample>& train,
                                      const std::vector<TrainSample>& val,
                                      const TrainOptions& opt,
                                      const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace ivdoa
