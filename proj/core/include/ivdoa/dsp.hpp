#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ivdoa {

/// Floor added inside the log of logmel() so silent bands stay finite.
inline constexpr double kLogFloor = 1e-10;

struct MonoSignal {
  std::vector<double> samples;
  double sample_rate = 48000.0;
};

struct StftConfig {
  std::size_t fft_size = 8192;
  std::size_t hop = 960;  // 20 ms at 48 kHz
};

// One-sided complex spectrogram. bins[f][t], f in 0..fft_size/2.
// Frame t covers samples [t*hop, t*hop + fft_size); trailing samples that
// do not fill a frame are dropped. Bins are Hann-windowed DFT values
// scaled by 2/sum(window), so a unit-amplitude bin-centred cosine reads
// close to magnitude 1.
struct ComplexSpectrogram {
  std::vector<std::vector<std::complex<double>>> bins;
  std::size_t fft_size = 0;
  std::size_t hop = 0;
  double sample_rate = 0.0;

  std::size_t num_bins() const { return bins.size(); }
  std::size_t num_frames() const { return bins.empty() ? 0 : bins[0].size(); }
};

// Triangular mel filterbank; weights[b][f], peak-normalized to 1 per band.
struct MelFilterbank {
  std::vector<std::vector<double>> weights;
  std::vector<double> band_center_hz;
  double sample_rate = 0.0;
  std::size_t fft_size = 0;

  std::size_t num_bands() const { return weights.size(); }
  std::size_t num_bins() const { return weights.empty() ? 0 : weights[0].size(); }
};

double mel_scale(double hz);
double mel_to_hz(double mel);

// w[k] = 0.5 - 0.5 cos(2 pi k / (n-1)); throws std::invalid_argument for n < 2.
std::vector<double> hann_window(std::size_t n);

ComplexSpectrogram stft(const MonoSignal& x, const StftConfig& cfg);

// |bins|^2 per cell.
std::vector<std::vector<double>> power_spectrum(const ComplexSpectrogram& spec);

MelFilterbank mel_filterbank(std::size_t num_bands, std::size_t fft_size,
                             double sample_rate, double f_min = 0.0,
                             double f_max = -1.0 /* defaults to Nyquist */);

// out[b][t] = sum_f weights[b][f] * field[f][t].
std::vector<std::vector<double>> apply_mel(const MelFilterbank& fb,
                                           const std::vector<std::vector<double>>& field);

// ln(apply_mel(power) + kLogFloor); power must be elementwise >= 0.
std::vector<std::vector<double>> logmel(const MelFilterbank& fb,
                                        const std::vector<std::vector<double>>& power);

}  // namespace ivdoa
