#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivdoa/foa.hpp"

namespace ivdoa {

enum class SourceKind { White, AmNoise, Tone };

SourceKind source_kind_from_string(const std::string& s);
std::string to_string(SourceKind k);

enum class NoiseKind { White, Pink };

struct SceneEvent {
  double onset_s = 0.0;
  double offset_s = 0.0;
  Direction direction;
  SourceKind kind = SourceKind::White;
};

struct ReverbSpec {
  double rt60_s = 0.0;            // 0 disables the tail
  double drr_db = 0.0;            // direct-to-reverb ratio of the render
  std::size_t diffuse_directions = 32;
};

struct NoiseSpec {
  bool enabled = false;
  double snr_db = 0.0;            // direct-to-noise ratio over active frames
  NoiseKind kind = NoiseKind::White;
};

struct SceneSpec {
  double duration_s = 5.0;
  double sample_rate = 48000.0;
  std::vector<SceneEvent> events;  // must not overlap in time
  ReverbSpec reverb;
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

// Per-frame ground truth at the STFT frame grid. Frame t is active when
// the hop cell [t*hop, (t+1)*hop) overlaps an event by at least half a hop.
struct GroundTruth {
  std::vector<Direction> doa;      // valid where active
  std::vector<int> active;         // z_t in {0,1}
};

struct SceneRender {
  FoaSignal direct;
  FoaSignal reverb;
  FoaSignal noise;
  FoaSignal mixture;               // direct + reverb + noise, sample-wise
  std::vector<SceneEvent> events;  // copy of the spec's events
  double sample_rate = 48000.0;
};

// Deterministic given the spec (including seed).
SceneRender simulate_scene(const SceneSpec& spec);

GroundTruth ground_truth_tracks(const std::vector<SceneEvent>& events,
                                std::size_t num_frames, const StftConfig& cfg,
                                double sample_rate);

struct OracleComponents {
  IntensityField total;          // from the mixture
  IntensityField direct;         // I^s, from the direct component
  IntensityField reverb_noise;   // residual: total - direct, exact
};

OracleComponents oracle_components(const SceneRender& r, const StftConfig& cfg);

// Ideal-ratio-style mask E_s / (E_s + E_rn + eps), energies summed over
// the four channels per bin. Values in [0, 1].
MaskField oracle_mask(const SceneRender& r, const StftConfig& cfg, double eps = 1e-12);

}  // namespace ivdoa
