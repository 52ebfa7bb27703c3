#pragma once

#include <cstddef>
#include <vector>

#include "ivdoa/foa.hpp"
#include "ivdoa/net.hpp"
#include "ivdoa/tracks.hpp"

namespace ivdoa {

// Linear-domain IV chain: STFT -> IV -> optional energy mask -> band sum
// per frame -> DOA.
struct BaselineResult {
  DoaTrack track;
  std::vector<double> iv_norms;  // per-frame |I_t| before extraction
};
BaselineResult run_baseline(const FoaSignal& sig, const StftConfig& cfg, bool use_mask);

// Neural chain: features -> forward (Eval) -> refinement -> DOA, plus the
// activity probabilities.
struct NeuralResult {
  DoaTrack track;
  ActivityTrack sad;
};
NeuralResult run_neural(const FoaSignal& sig, const NetworkParams& net,
                        const StftConfig& cfg, std::size_t mel_bands);

// Active iff a_t strictly exceeds alpha.
std::vector<int> sad_threshold(const ActivityTrack& a, double alpha = 0.5);

// Maximal runs of consecutive active frames.
std::vector<EventSegment> segment_events(const std::vector<int>& active);

// Post-processing on the 10-degree grid: discretize both angles, then
// hold the per-event median. Azimuth uses a circular median
// over the full grid (smallest summed wrapped distance, ties to the
// smaller absolute azimuth, then to the positive one); elevation uses the
// lower median.
int discretize_deg10(double deg);
int circular_median_azimuth_deg(const std::vector<int>& members_deg);
int lower_median_elevation_deg(std::vector<int> members_deg);
DoaTrack postprocess(const DoaTrack& doa, const std::vector<EventSegment>& events);

// Mean spherical central angle over ground-truth-active frames, degrees.
// Throws std::invalid_argument when no frame is active.
double doa_error_deg(const DoaTrack& est, const DoaTrack& gt, const std::vector<int>& gt_z);

// Fraction of frames whose detected activity matches the label.
double frame_recall(const std::vector<int>& est_active, const std::vector<int>& gt_z);

struct FoldMetrics {
  std::string name;
  double de_deg = 0.0;
  double fr = 0.0;
};

struct MetricsReport {
  std::vector<FoldMetrics> folds;
  FoldMetrics aggregate() const;  // unweighted mean of folds
};

}  // namespace ivdoa
