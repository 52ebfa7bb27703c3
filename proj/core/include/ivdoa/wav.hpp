#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivdoa {

struct WavError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WavData {
  std::vector<std::vector<double>> channels;
  double sample_rate = 0.0;

  std::size_t num_frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

// RIFF/WAVE reader: PCM 16/24/32 and IEEE float 32/64, interleaved.
WavData read_wav(const std::string& path);

// Writes IEEE float32; deterministic byte output for identical input.
void write_wav(const std::string& path, const WavData& data);

}  // namespace ivdoa
