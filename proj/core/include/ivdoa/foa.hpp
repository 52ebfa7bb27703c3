#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "ivdoa/dsp.hpp"

namespace ivdoa {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const;
};

// Azimuth in (-pi, pi], elevation in [-pi/2, pi/2].
struct Direction {
  double azimuth = 0.0;
  double elevation = 0.0;
};

Direction direction_from_degrees(double azimuth_deg, double elevation_deg);

// (cos az cos el, sin az cos el, sin el). Exact zeros for cos(el) at the
// poles so that pole-encoded sources have X = Y = 0 identically.
Vec3 unit_vector(const Direction& d);

struct SteeringVector {
  double w = 0.0, x = 0.0, y = 0.0, z = 0.0;
};

// Ideal frequency-flat FOA response: w = 3^(-1/2), (x,y,z) = unit_vector.
SteeringVector steering_vector(const Direction& d);

// Time-domain 4-channel B-format signal, channel order W, X, Y, Z.
struct FoaSignal {
  std::array<std::vector<double>, 4> channels;
  double sample_rate = 48000.0;

  std::size_t length() const { return channels[0].size(); }
};

FoaSignal encode_plane_wave(const MonoSignal& s, const Direction& d);

// STFTs of the four channels with identical configuration.
struct SpectrogramSet {
  ComplexSpectrogram w, x, y, z;

  std::size_t num_bins() const { return w.num_bins(); }
  std::size_t num_frames() const { return w.num_frames(); }
};

SpectrogramSet stft_foa(const FoaSignal& sig, const StftConfig& cfg);

enum class BandDomain { Linear, Mel };

// Per-(band, frame) 3-vector field. iv[band][t].
struct IntensityField {
  std::vector<std::vector<Vec3>> iv;
  BandDomain domain = BandDomain::Linear;

  std::size_t num_bands() const { return iv.size(); }
  std::size_t num_frames() const { return iv.empty() ? 0 : iv[0].size(); }
};

struct MaskField {
  std::vector<std::vector<double>> m;
  BandDomain domain = BandDomain::Linear;

  std::size_t num_bands() const { return m.size(); }
  std::size_t num_frames() const { return m.empty() ? 0 : m[0].size(); }
};

// Medium constants for the energy mask. Physically the acoustic
// intensity is (1/2) Re(p* v) with sound pressure p and particle
// velocity v; the B-format approximation used throughout only needs the
// combination lambda = 1 / (2 rho0 c^2).
struct PhysicalConstants {
  double rho0 = 1.2;  // air density, kg/m^3
  double c = 343.0;   // speed of sound, m/s

  double lambda() const { return 1.0 / (2.0 * rho0 * c * c); }
};

// iv[f][t] = Re(conj(W) * (X, Y, Z)); proportionality constant 1.
IntensityField intensity_field(const SpectrogramSet& sp);

// m[f][t] = lambda * (|W|^2 + (|X|^2 + |Y|^2 + |Z|^2) / 3).
MaskField energy_mask(const SpectrogramSet& sp, const PhysicalConstants& k = {});

// v -> v / (|v| + eps); exact zero vectors stay zero.
IntensityField normalize_iv(const IntensityField& field, double eps = 1e-12);

// I_t = sum_band mask * (iv - reverb). Missing mask means all-ones,
// missing reverb means zero. Shapes and band domains must agree.
std::vector<Vec3> aggregate_refined(const IntensityField& iv,
                                    const MaskField* mask = nullptr,
                                    const IntensityField* reverb = nullptr);

struct DoaEstimate {
  Direction dir;
  bool azimuth_degenerate = false;  // x = y = 0
  bool zero = false;                // whole vector zero
};

// az = atan2(y, x), el = atan2(z, sqrt(x^2 + y^2)).
DoaEstimate extract_doa(const Vec3& v);

// Apply mel compression to each IV component; result tagged Mel.
IntensityField mel_compress_iv(const MelFilterbank& fb, const IntensityField& linear);

}  // namespace ivdoa
