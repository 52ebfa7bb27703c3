#include "ivdoa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ivdoa {

BaselineResult run_baseline(const FoaSignal& sig, const StftConfig& cfg, bool use_mask) {
  const SpectrogramSet sp = stft_foa(sig, cfg);
  const IntensityField iv = intensity_field(sp);
  std::vector<Vec3> frames;
  if (use_mask) {
    const MaskField mask = energy_mask(sp);
    frames = aggregate_refined(iv, &mask, nullptr);
  } else {
    frames = aggregate_refined(iv, nullptr, nullptr);
  }
  BaselineResult res;
  res.track = doa_track_from_frames(frames);
  res.iv_norms.resize(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) res.iv_norms[t] = frames[t].norm();
  return res;
}

NeuralResult run_neural(const FoaSignal& sig, const NetworkParams& net, const StftConfig& cfg,
                        std::size_t mel_bands) {
  if (net.cfg.bands != mel_bands)
    throw std::invalid_argument("run_neural: checkpoint expects " +
                                std::to_string(net.cfg.bands) + " mel bands, configured " +
                                std::to_string(mel_bands));
  const SpectrogramSet sp = stft_foa(sig, cfg);
  const MelFilterbank fb = mel_filterbank(mel_bands, cfg.fft_size, sig.sample_rate);
  const FeatureSet fs = make_features(sp, fb);
  const ForwardResult fwd = forward(net, fs.x, NetMode::Eval);
  const RefineResult refined = refine_with_net(fs.iv_mel_norm, fwd.out);
  NeuralResult res;
  res.track = doa_track_from_frames(refined.frames);
  res.sad.value = fwd.out.sad;
  return res;
}

std::vector<int> sad_threshold(const ActivityTrack& a, double alpha) {
  std::vector<int> out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (!(a.value[t] >= 0.0 && a.value[t] <= 1.0))
      throw std::invalid_argument("sad_threshold: probabilities must lie in [0,1]");
    out[t] = a.value[t] > alpha ? 1 : 0;
  }
  return out;
}

std::vector<EventSegment> segment_events(const std::vector<int>& active) {
  std::vector<EventSegment> segs;
  std::size_t t = 0;
  while (t < active.size()) {
    if (!active[t]) {
      ++t;
      continue;
    }
    std::size_t begin = t;
    while (t < active.size() && active[t]) ++t;
    segs.push_back({begin, t});
  }
  return segs;
}

int discretize_deg10(double deg) {
  int v = static_cast<int>(std::llround(deg / 10.0)) * 10;
  if (v <= -180) v += 360;  // azimuth grid is (-170 .. 180]
  return v;
}

namespace {

int wrapped_distance_deg(int a, int b) {
  int d = std::abs(a - b) % 360;
  return d > 180 ? 360 - d : d;
}

}  // namespace

int circular_median_azimuth_deg(const std::vector<int>& members_deg) {
  if (members_deg.empty()) throw std::invalid_argument("circular median of empty set");
  int best_c = 0;
  long best_cost = -1;
  for (int c = -170; c <= 180; c += 10) {
    long cost = 0;
    for (const int m : members_deg) cost += wrapped_distance_deg(c, m);
    const bool better =
        best_cost < 0 || cost < best_cost ||
        (cost == best_cost && (std::abs(c) < std::abs(best_c) ||
                               (std::abs(c) == std::abs(best_c) && c > best_c)));
    if (better) {
      best_cost = cost;
      best_c = c;
    }
  }
  return best_c;
}

int lower_median_elevation_deg(std::vector<int> members_deg) {
  if (members_deg.empty()) throw std::invalid_argument("median of empty set");
  std::sort(members_deg.begin(), members_deg.end());
  return members_deg[(members_deg.size() - 1) / 2];
}

DoaTrack postprocess(const DoaTrack& doa, const std::vector<EventSegment>& events) {
  DoaTrack out = doa;
  for (const auto& seg : events) {
    if (seg.begin >= seg.end || seg.end > doa.size())
      throw std::invalid_argument("postprocess: event outside the track");
    std::vector<int> az, el;
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      az.push_back(discretize_deg10(doa.azimuth[t] * 180.0 / kPi));
      el.push_back(static_cast<int>(std::llround(doa.elevation[t] * 180.0 / kPi / 10.0)) * 10);
    }
    const double az_med = circular_median_azimuth_deg(az) * kPi / 180.0;
    const double el_med = lower_median_elevation_deg(el) * kPi / 180.0;
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      out.azimuth[t] = az_med;
      out.elevation[t] = el_med;
    }
  }
  return out;
}

double doa_error_deg(const DoaTrack& est, const DoaTrack& gt, const std::vector<int>& gt_z) {
  if (est.size() != gt.size() || gt_z.size() != gt.size())
    throw std::invalid_argument("doa_error: track lengths differ");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (!gt_z[t]) continue;
    // spherical central angle in the atan2 form, which stays exact at 0
    // and 180 degrees where acos loses precision
    const Vec3 u = unit_vector({gt.azimuth[t], gt.elevation[t]});
    const Vec3 v = unit_vector({est.azimuth[t], est.elevation[t]});
    const Vec3 cross{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
    acc += std::atan2(cross.norm(), u.dot(v));
    ++n;
  }
  if (n == 0) throw std::invalid_argument("doa_error: no active frames, metric undefined");
  return acc / static_cast<double>(n) * 180.0 / kPi;
}

double frame_recall(const std::vector<int>& est_active, const std::vector<int>& gt_z) {
  if (est_active.size() != gt_z.size())
    throw std::invalid_argument("frame_recall: track lengths differ");
  if (gt_z.empty()) throw std::invalid_argument("frame_recall: empty tracks, metric undefined");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < gt_z.size(); ++t)
    if ((est_active[t] != 0) == (gt_z[t] != 0)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gt_z.size());
}

FoldMetrics MetricsReport::aggregate() const {
  FoldMetrics agg;
  agg.name = "average";
  if (folds.empty()) return agg;
  for (const auto& f : folds) {
    agg.de_deg += f.de_deg;
    agg.fr += f.fr;
  }
  agg.de_deg /= static_cast<double>(folds.size());
  agg.fr /= static_cast<double>(folds.size());
  return agg;
}

}  // namespace ivdoa
