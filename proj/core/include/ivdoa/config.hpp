#pragma once

#include <cstdint>
#include <string>

#include "ivdoa/dsp.hpp"
#include "ivdoa/net.hpp"

namespace ivdoa {

// Effective run configuration. Resolution order: built-in defaults, then
// the config file, then IVDOA_* environment variables, then CLI flags.
struct RunConfig {
  double sample_rate = 48000.0;
  std::size_t fft_size = 8192;
  double hop_ms = 20.0;
  std::size_t mel_bands = 96;
  double sad_alpha = 0.5;
  std::size_t epochs = 100;
  LrSchedule schedule;
  bool augment = false;
  bool use_mask = true;
  std::string channel_order = "wxyz";  // or "acn" (file order W, Y, Z, X)
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  NetConfig net;

  StftConfig stft() const {
    StftConfig c;
    c.fft_size = fft_size;
    c.hop = static_cast<std::size_t>(hop_ms / 1000.0 * sample_rate + 0.5);
    return c;
  }
  void validate() const;  // throws std::invalid_argument
};

// Plain key = value lines, '#' comments. Unknown keys are rejected.
void apply_config_file(RunConfig& cfg, const std::string& path);

// IVDOA_<KEY> variables, e.g. IVDOA_SEED, IVDOA_MEL_BANDS.
void apply_environment(RunConfig& cfg);

// Text rendering of the effective configuration (also valid as a config
// file). Written into output directories for provenance.
std::string render_config(const RunConfig& cfg);

}  // namespace ivdoa
