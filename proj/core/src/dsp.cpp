#include "ivdoa/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace ivdoa {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 complex FFT with a per-plan twiddle table. A plan is
// built once per stft() call and reused across frames and channels.
class FftPlan {
public:
  explicit FftPlan(std::size_t n) : n_(n) {
    rev_.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < log2n; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
      rev_[i] = r;
    }
    tw_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
      tw_[k] = {std::cos(a), std::sin(a)};
    }
  }

  void transform(std::vector<std::complex<double>>& a) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (rev_[i] > i) std::swap(a[i], a[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t stride = n_ / len;
      for (std::size_t base = 0; base < n_; base += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const std::complex<double> w = tw_[k * stride];
          const std::complex<double> u = a[base + k];
          const std::complex<double> v = a[base + k + len / 2] * w;
          a[base + k] = u + v;
          a[base + k + len / 2] = u - v;
        }
      }
    }
  }

private:
  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<std::complex<double>> tw_;
};

// Real-input FFT of size n via a complex FFT of size n/2 (even/odd
// packing). Outputs the one-sided bins 0..n/2.
class RealFftPlan {
public:
  explicit RealFftPlan(std::size_t n) : n_(n), half_(n / 2) {
    post_.resize(half_ + 1);
    for (std::size_t f = 0; f <= half_; ++f) {
      const double a = -kTwoPi * static_cast<double>(f) / static_cast<double>(n);
      post_[f] = {std::cos(a), std::sin(a)};
    }
    buf_.resize(half_);
  }

  void transform(const double* x, std::vector<std::complex<double>>& out) {
    for (std::size_t k = 0; k < half_; ++k) buf_[k] = {x[2 * k], x[2 * k + 1]};
    if (!inner_) inner_ = std::make_unique<FftPlan>(half_);
    inner_->transform(buf_);
    out.resize(half_ + 1);
    for (std::size_t f = 0; f <= half_; ++f) {
      const std::complex<double> zf = (f == half_) ? buf_[0] : buf_[f];
      const std::complex<double> zc = std::conj((f == 0) ? buf_[0] : buf_[half_ - f]);
      const std::complex<double> even = 0.5 * (zf + zc);
      const std::complex<double> odd = std::complex<double>(0.0, -0.5) * (zf - zc);
      out[f] = even + post_[f] * odd;
    }
  }

private:
  std::size_t n_, half_;
  std::vector<std::complex<double>> post_;
  std::vector<std::complex<double>> buf_;
  std::unique_ptr<FftPlan> inner_;
};

}  // namespace

double mel_scale(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw std::invalid_argument("hann_window: n must be >= 2");
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n - 1));
  return w;
}

ComplexSpectrogram stft(const MonoSignal& x, const StftConfig& cfg) {
  if (!is_power_of_two(cfg.fft_size) || cfg.fft_size < 4)
    throw std::invalid_argument("stft: fft_size must be a power of two >= 4");
  if (cfg.hop < 1) throw std::invalid_argument("stft: hop must be >= 1");
  if (x.sample_rate <= 0.0) throw std::invalid_argument("stft: sample_rate must be positive");
  if (x.samples.size() < cfg.fft_size)
    throw std::invalid_argument("stft: signal shorter than one frame, spectrogram would be empty");
  for (const double s : x.samples)
    if (!std::isfinite(s)) throw std::invalid_argument("stft: non-finite sample");

  const std::size_t n = cfg.fft_size;
  const std::size_t num_frames = (x.samples.size() - n) / cfg.hop + 1;
  const std::size_t num_bins = n / 2 + 1;

  const std::vector<double> window = hann_window(n);
  double wsum = 0.0;
  for (const double w : window) wsum += w;
  const double scale = 2.0 / wsum;

  ComplexSpectrogram spec;
  spec.fft_size = n;
  spec.hop = cfg.hop;
  spec.sample_rate = x.sample_rate;
  spec.bins.assign(num_bins, std::vector<std::complex<double>>(num_frames));

  RealFftPlan plan(n);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> out;
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double* src = x.samples.data() + t * cfg.hop;
    for (std::size_t k = 0; k < n; ++k) frame[k] = src[k] * window[k];
    plan.transform(frame.data(), out);
    for (std::size_t f = 0; f < num_bins; ++f) spec.bins[f][t] = out[f] * scale;
  }
  return spec;
}

std::vector<std::vector<double>> power_spectrum(const ComplexSpectrogram& spec) {
  std::vector<std::vector<double>> p(spec.num_bins(),
                                     std::vector<double>(spec.num_frames()));
  for (std::size_t f = 0; f < spec.num_bins(); ++f)
    for (std::size_t t = 0; t < spec.num_frames(); ++t) p[f][t] = std::norm(spec.bins[f][t]);
  return p;
}

MelFilterbank mel_filterbank(std::size_t num_bands, std::size_t fft_size,
                             double sample_rate, double f_min, double f_max) {
  if (f_max < 0.0) f_max = sample_rate / 2.0;
  if (num_bands < 1) throw std::invalid_argument("mel_filterbank: need at least one band");
  if (!is_power_of_two(fft_size)) throw std::invalid_argument("mel_filterbank: fft_size must be a power of two");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0))
    throw std::invalid_argument("mel_filterbank: need 0 <= f_min < f_max <= Nyquist");

  const std::size_t num_bins = fft_size / 2 + 1;
  const double mel_lo = mel_scale(f_min);
  const double mel_hi = mel_scale(f_max);
  std::vector<double> edges(num_bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                            static_cast<double>(num_bands + 1);

  MelFilterbank fb;
  fb.sample_rate = sample_rate;
  fb.fft_size = fft_size;
  fb.weights.assign(num_bands, std::vector<double>(num_bins, 0.0));
  fb.band_center_hz.resize(num_bands);

  for (std::size_t b = 0; b < num_bands; ++b) {
    fb.band_center_hz[b] = mel_to_hz(edges[b + 1]);
    double peak = 0.0;
    for (std::size_t k = 0; k < num_bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      const double m = mel_scale(hz);
      double w = 0.0;
      if (m > edges[b] && m < edges[b + 2]) {
        w = (m <= edges[b + 1]) ? (m - edges[b]) / (edges[b + 1] - edges[b])
                                : (edges[b + 2] - m) / (edges[b + 2] - edges[b + 1]);
      }
      fb.weights[b][k] = w;
      peak = std::max(peak, w);
    }
    if (peak <= 0.0)
      throw std::invalid_argument("mel_filterbank: band " + std::to_string(b) +
                                  " covers no FFT bin; too many bands for this resolution");
    for (double& w : fb.weights[b]) w /= peak;
  }
  return fb;
}

std::vector<std::vector<double>> apply_mel(const MelFilterbank& fb,
                                           const std::vector<std::vector<double>>& field) {
  if (field.size() != fb.num_bins())
    throw std::invalid_argument("apply_mel: field row count does not match filterbank bins");
  const std::size_t num_frames = field.empty() ? 0 : field[0].size();
  for (const auto& row : field)
    if (row.size() != num_frames) throw std::invalid_argument("apply_mel: ragged field");

  std::vector<std::vector<double>> out(fb.num_bands(), std::vector<double>(num_frames, 0.0));
  for (std::size_t b = 0; b < fb.num_bands(); ++b) {
    const auto& w = fb.weights[b];
    // triangles are narrow; skip the zero span
    std::size_t first = 0, last = w.size();
    while (first < w.size() && w[first] == 0.0) ++first;
    while (last > first && w[last - 1] == 0.0) --last;
    auto& dst = out[b];
    for (std::size_t f = first; f < last; ++f) {
      const double wf = w[f];
      if (wf == 0.0) continue;
      const auto& src = field[f];
      for (std::size_t t = 0; t < num_frames; ++t) dst[t] += wf * src[t];
    }
  }
  return out;
}

std::vector<std::vector<double>> logmel(const MelFilterbank& fb,
                                        const std::vector<std::vector<double>>& power) {
  for (const auto& row : power)
    for (const double p : row)
      if (!(p >= 0.0)) throw std::invalid_argument("logmel: power must be nonnegative");
  auto out = apply_mel(fb, power);
  for (auto& row : out)
    for (double& v : row) v = std::log(v + kLogFloor);
  return out;
}

}  // namespace ivdoa
