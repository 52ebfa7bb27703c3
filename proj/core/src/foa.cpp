#include "ivdoa/foa.hpp"

#include <cmath>
#include <stdexcept>

namespace ivdoa {

namespace {
constexpr double kInvSqrt3 = 0.57735026918962576451;
constexpr double kHalfPi = 1.57079632679489661923;
}  // namespace

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Direction direction_from_degrees(double azimuth_deg, double elevation_deg) {
  return {azimuth_deg * kPi / 180.0, elevation_deg * kPi / 180.0};
}

Vec3 unit_vector(const Direction& d) {
  // cos(elevation) at the poles is forced to an exact zero so pole
  // encodings have X = Y = 0 identically.
  double cos_el, sin_el;
  if (d.elevation == kHalfPi) {
    cos_el = 0.0;
    sin_el = 1.0;
  } else if (d.elevation == -kHalfPi) {
    cos_el = 0.0;
    sin_el = -1.0;
  } else {
    cos_el = std::cos(d.elevation);
    sin_el = std::sin(d.elevation);
  }
  return {std::cos(d.azimuth) * cos_el, std::sin(d.azimuth) * cos_el, sin_el};
}

SteeringVector steering_vector(const Direction& d) {
  const Vec3 u = unit_vector(d);
  return {kInvSqrt3, u.x, u.y, u.z};
}

FoaSignal encode_plane_wave(const MonoSignal& s, const Direction& d) {
  const SteeringVector h = steering_vector(d);
  const double gains[4] = {h.w, h.x, h.y, h.z};
  FoaSignal out;
  out.sample_rate = s.sample_rate;
  for (int c = 0; c < 4; ++c) {
    out.channels[c].resize(s.samples.size());
    const double g = gains[c];
    for (std::size_t i = 0; i < s.samples.size(); ++i) out.channels[c][i] = g * s.samples[i];
  }
  return out;
}

SpectrogramSet stft_foa(const FoaSignal& sig, const StftConfig& cfg) {
  SpectrogramSet sp;
  sp.w = stft({sig.channels[0], sig.sample_rate}, cfg);
  sp.x = stft({sig.channels[1], sig.sample_rate}, cfg);
  sp.y = stft({sig.channels[2], sig.sample_rate}, cfg);
  sp.z = stft({sig.channels[3], sig.sample_rate}, cfg);
  return sp;
}

namespace {

void check_consistent(const SpectrogramSet& sp) {
  const std::size_t f = sp.w.num_bins(), t = sp.w.num_frames();
  for (const ComplexSpectrogram* c : {&sp.x, &sp.y, &sp.z}) {
    if (c->num_bins() != f || c->num_frames() != t || c->fft_size != sp.w.fft_size ||
        c->hop != sp.w.hop)
      throw std::invalid_argument("SpectrogramSet: channels disagree in shape or config");
  }
}

}  // namespace

IntensityField intensity_field(const SpectrogramSet& sp) {
  check_consistent(sp);
  IntensityField out;
  out.domain = BandDomain::Linear;
  out.iv.assign(sp.num_bins(), std::vector<Vec3>(sp.num_frames()));
  for (std::size_t f = 0; f < sp.num_bins(); ++f) {
    for (std::size_t t = 0; t < sp.num_frames(); ++t) {
      const std::complex<double> wc = std::conj(sp.w.bins[f][t]);
      out.iv[f][t] = {(wc * sp.x.bins[f][t]).real(), (wc * sp.y.bins[f][t]).real(),
                      (wc * sp.z.bins[f][t]).real()};
    }
  }
  return out;
}

MaskField energy_mask(const SpectrogramSet& sp, const PhysicalConstants& k) {
  check_consistent(sp);
  const double lambda = k.lambda();
  MaskField out;
  out.domain = BandDomain::Linear;
  out.m.assign(sp.num_bins(), std::vector<double>(sp.num_frames()));
  for (std::size_t f = 0; f < sp.num_bins(); ++f) {
    for (std::size_t t = 0; t < sp.num_frames(); ++t) {
      const double dipoles = std::norm(sp.x.bins[f][t]) + std::norm(sp.y.bins[f][t]) +
                             std::norm(sp.z.bins[f][t]);
      out.m[f][t] = lambda * (std::norm(sp.w.bins[f][t]) + dipoles / 3.0);
    }
  }
  return out;
}

IntensityField normalize_iv(const IntensityField& field, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("normalize_iv: eps must be positive");
  IntensityField out = field;
  for (auto& band : out.iv) {
    for (Vec3& v : band) {
      const double n = v.norm();
      if (n > 0.0) v = v * (1.0 / (n + eps));
    }
  }
  return out;
}

std::vector<Vec3> aggregate_refined(const IntensityField& iv, const MaskField* mask,
                                    const IntensityField* reverb) {
  const std::size_t bands = iv.num_bands(), frames = iv.num_frames();
  if (mask) {
    if (mask->num_bands() != bands || mask->num_frames() != frames)
      throw std::invalid_argument("aggregate_refined: mask shape mismatch");
    if (mask->domain != iv.domain)
      throw std::invalid_argument("aggregate_refined: mask band domain mismatch");
  }
  if (reverb) {
    if (reverb->num_bands() != bands || reverb->num_frames() != frames)
      throw std::invalid_argument("aggregate_refined: reverb shape mismatch");
    if (reverb->domain != iv.domain)
      throw std::invalid_argument("aggregate_refined: reverb band domain mismatch");
  }
  std::vector<Vec3> out(frames);
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      Vec3 v = iv.iv[b][t];
      if (reverb) v = v - reverb->iv[b][t];
      if (mask) v = v * mask->m[b][t];
      out[t] = out[t] + v;
    }
  }
  return out;
}

DoaEstimate extract_doa(const Vec3& v) {
  DoaEstimate est;
  const double planar = std::sqrt(v.x * v.x + v.y * v.y);
  est.azimuth_degenerate = (v.x == 0.0 && v.y == 0.0);
  est.zero = est.azimuth_degenerate && v.z == 0.0;
  est.dir.azimuth = est.azimuth_degenerate ? 0.0 : std::atan2(v.y, v.x);
  est.dir.elevation = est.zero ? 0.0 : std::atan2(v.z, planar);
  return est;
}

IntensityField mel_compress_iv(const MelFilterbank& fb, const IntensityField& linear) {
  if (linear.domain != BandDomain::Linear)
    throw std::invalid_argument("mel_compress_iv: input must be a linear-domain field");
  const std::size_t frames = linear.num_frames();
  std::vector<std::vector<double>> comp(linear.num_bands(), std::vector<double>(frames));
  IntensityField out;
  out.domain = BandDomain::Mel;
  out.iv.assign(fb.num_bands(), std::vector<Vec3>(frames));
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t f = 0; f < linear.num_bands(); ++f)
      for (std::size_t t = 0; t < frames; ++t)
        comp[f][t] = axis == 0 ? linear.iv[f][t].x : (axis == 1 ? linear.iv[f][t].y : linear.iv[f][t].z);
    const auto mel = apply_mel(fb, comp);
    for (std::size_t b = 0; b < fb.num_bands(); ++b)
      for (std::size_t t = 0; t < frames; ++t)
        (axis == 0 ? out.iv[b][t].x : (axis == 1 ? out.iv[b][t].y : out.iv[b][t].z)) = mel[b][t];
  }
  return out;
}

}  // namespace ivdoa
