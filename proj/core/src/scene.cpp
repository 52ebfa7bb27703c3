#include "ivdoa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ivdoa/rng.hpp"

namespace ivdoa {

namespace {

constexpr std::size_t kNoisePlaneWaves = 16;
constexpr double kNoiseBaseAmplitude = 0.1;

Direction random_direction(Rng& rng) {
  const double az = rng.uniform(-kPi, kPi);
  const double el = std::asin(rng.uniform(-1.0, 1.0));
  return {az, el};
}

std::vector<double> render_source(SourceKind kind, std::size_t n, double sample_rate, Rng& rng) {
  std::vector<double> s(n);
  switch (kind) {
    case SourceKind::White:
      for (double& v : s) v = 0.25 * rng.normal();
      break;
    case SourceKind::AmNoise: {
      const double mod_hz = rng.uniform(2.0, 6.0);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double env = 0.15 + 0.85 * 0.5 * (1.0 + std::sin(2.0 * kPi * mod_hz * t + phase));
        s[i] = 0.25 * env * rng.normal();
      }
      break;
    }
    case SourceKind::Tone: {
      const double hz = rng.uniform(200.0, 2000.0);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t i = 0; i < n; ++i)
        s[i] = 0.35 * std::sin(2.0 * kPi * hz * static_cast<double>(i) / sample_rate + phase);
      break;
    }
  }
  return s;
}

// Paul Kellet's economy pink filter over a white stream.
std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  std::vector<double> s(n);
  double b0 = 0, b1 = 0, b2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    s[i] = 0.2 * (b0 + b1 + b2 + w * 0.1848);
  }
  return s;
}

void add_encoded(FoaSignal& dst, const std::vector<double>& mono, std::size_t offset,
                 const Direction& d) {
  const SteeringVector h = steering_vector(d);
  const double gains[4] = {h.w, h.x, h.y, h.z};
  for (int c = 0; c < 4; ++c) {
    double* out = dst.channels[c].data() + offset;
    const double g = gains[c];
    for (std::size_t i = 0; i < mono.size(); ++i) out[i] += g * mono[i];
  }
}

double energy(const FoaSignal& sig) {
  double e = 0.0;
  for (const auto& ch : sig.channels)
    for (const double v : ch) e += v * v;
  return e;
}

double energy_over_cells(const FoaSignal& sig, const std::vector<int>& active_cells,
                         std::size_t hop) {
  double e = 0.0;
  for (std::size_t t = 0; t < active_cells.size(); ++t) {
    if (!active_cells[t]) continue;
    const std::size_t begin = t * hop;
    const std::size_t end = std::min(begin + hop, sig.length());
    for (const auto& ch : sig.channels)
      for (std::size_t i = begin; i < end; ++i) e += ch[i] * ch[i];
  }
  return e;
}

void scale_signal(FoaSignal& sig, double g) {
  for (auto& ch : sig.channels)
    for (double& v : ch) v *= g;
}

std::vector<int> activity_cells(const std::vector<SceneEvent>& events, std::size_t num_cells,
                                std::size_t hop, double sample_rate) {
  std::vector<int> active(num_cells, 0);
  for (std::size_t t = 0; t < num_cells; ++t) {
    const double cell_begin = static_cast<double>(t * hop) / sample_rate;
    const double cell_end = static_cast<double>((t + 1) * hop) / sample_rate;
    double best = 0.0;
    for (const auto& ev : events) {
      const double ov = std::min(cell_end, ev.offset_s) - std::max(cell_begin, ev.onset_s);
      best = std::max(best, ov);
    }
    active[t] = best >= 0.5 * (cell_end - cell_begin) ? 1 : 0;
  }
  return active;
}

void validate(const SceneSpec& spec) {
  if (spec.duration_s <= 0.0) throw std::invalid_argument("scene: duration must be positive");
  if (spec.sample_rate <= 0.0) throw std::invalid_argument("scene: sample_rate must be positive");
  if (spec.reverb.rt60_s < 0.0) throw std::invalid_argument("scene: rt60 must be >= 0");
  if (spec.reverb.rt60_s > 0.0 && spec.reverb.diffuse_directions == 0)
    throw std::invalid_argument("scene: reverb needs at least one diffuse direction");
  auto sorted = spec.events;
  std::sort(sorted.begin(), sorted.end(),
            [](const SceneEvent& a, const SceneEvent& b) { return a.onset_s < b.onset_s; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& ev = sorted[i];
    if (!(ev.onset_s >= 0.0 && ev.onset_s < ev.offset_s && ev.offset_s <= spec.duration_s))
      throw std::invalid_argument("scene: event outside [0, duration] or empty");
    if (i + 1 < sorted.size() && ev.offset_s > sorted[i + 1].onset_s)
      throw std::invalid_argument("scene: overlapping events are not supported");
  }
}

}  // namespace

SourceKind source_kind_from_string(const std::string& s) {
  if (s == "white") return SourceKind::White;
  if (s == "am" || s == "am_noise") return SourceKind::AmNoise;
  if (s == "tone") return SourceKind::Tone;
  throw std::invalid_argument("unknown source kind: " + s);
}

std::string to_string(SourceKind k) {
  switch (k) {
    case SourceKind::White: return "white";
    case SourceKind::AmNoise: return "am";
    case SourceKind::Tone: return "tone";
  }
  return "white";
}

SceneRender simulate_scene(const SceneSpec& spec) {
  validate(spec);
  const std::size_t n = static_cast<std::size_t>(spec.duration_s * spec.sample_rate + 0.5);
  const std::size_t hop = static_cast<std::size_t>(0.02 * spec.sample_rate + 0.5);

  SceneRender r;
  r.sample_rate = spec.sample_rate;
  r.events = spec.events;
  for (FoaSignal* s : {&r.direct, &r.reverb, &r.noise, &r.mixture}) {
    s->sample_rate = spec.sample_rate;
    for (auto& ch : s->channels) ch.assign(n, 0.0);
  }

  // Direct path and the dry mono bus feeding the reverb tail.
  std::vector<double> dry(n, 0.0);
  for (std::size_t k = 0; k < spec.events.size(); ++k) {
    const auto& ev = spec.events[k];
    const auto onset = static_cast<std::size_t>(ev.onset_s * spec.sample_rate + 0.5);
    const auto offset = static_cast<std::size_t>(ev.offset_s * spec.sample_rate + 0.5);
    Rng rng = Rng::fork(spec.seed, "event", k);
    const auto mono = render_source(ev.kind, std::min(offset, n) - onset, spec.sample_rate, rng);
    add_encoded(r.direct, mono, onset, ev.direction);
    for (std::size_t i = 0; i < mono.size(); ++i) dry[onset + i] += mono[i];
  }

  // Diffuse tail: delayed, exponentially decaying copies of the dry bus
  // from pseudo-random directions, then scaled to the requested DRR.
  if (spec.reverb.rt60_s > 0.0) {
    Rng rng = Rng::fork(spec.seed, "reverb");
    std::vector<double> copy(n);
    for (std::size_t k = 0; k < spec.reverb.diffuse_directions; ++k) {
      const Direction dir = random_direction(rng);
      const double delay_s = rng.uniform(0.0025, std::max(0.02, spec.reverb.rt60_s));
      const double gain = std::exp(-6.9 * delay_s / spec.reverb.rt60_s);
      const auto delay = static_cast<std::size_t>(delay_s * spec.sample_rate + 0.5);
      std::fill(copy.begin(), copy.end(), 0.0);
      for (std::size_t i = delay; i < n; ++i) copy[i] = gain * dry[i - delay];
      add_encoded(r.reverb, copy, 0, dir);
    }
    const double e_direct = energy(r.direct);
    const double e_reverb = energy(r.reverb);
    if (e_direct > 0.0 && e_reverb > 0.0)
      scale_signal(r.reverb, std::sqrt(e_direct / (e_reverb * std::pow(10.0, spec.reverb.drr_db / 10.0))));
  }

  // Isotropic noise bed, scaled against the direct energy over active frames.
  if (spec.noise.enabled) {
    Rng rng = Rng::fork(spec.seed, "noise");
    for (std::size_t k = 0; k < kNoisePlaneWaves; ++k) {
      const Direction dir = random_direction(rng);
      std::vector<double> mono;
      if (spec.noise.kind == NoiseKind::Pink) {
        mono = pink_noise(n, rng);
      } else {
        mono.resize(n);
        for (double& v : mono) v = rng.normal();
      }
      for (double& v : mono) v *= kNoiseBaseAmplitude;
      add_encoded(r.noise, mono, 0, dir);
    }
    const auto cells = activity_cells(spec.events, n / hop, hop, spec.sample_rate);
    const double e_direct = energy_over_cells(r.direct, cells, hop);
    const double e_noise = energy_over_cells(r.noise, cells, hop);
    if (e_direct > 0.0 && e_noise > 0.0)
      scale_signal(r.noise, std::sqrt(e_direct / (e_noise * std::pow(10.0, spec.noise.snr_db / 10.0))));
  }

  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < n; ++i)
      r.mixture.channels[c][i] =
          r.direct.channels[c][i] + r.reverb.channels[c][i] + r.noise.channels[c][i];
  return r;
}

GroundTruth ground_truth_tracks(const std::vector<SceneEvent>& events, std::size_t num_frames,
                                const StftConfig& cfg, double sample_rate) {
  GroundTruth gt;
  gt.doa.resize(num_frames);
  gt.active.assign(num_frames, 0);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double cell_begin = static_cast<double>(t * cfg.hop) / sample_rate;
    const double cell_end = static_cast<double>((t + 1) * cfg.hop) / sample_rate;
    double best = 0.0;
    const SceneEvent* best_ev = nullptr;
    for (const auto& ev : events) {
      const double ov = std::min(cell_end, ev.offset_s) - std::max(cell_begin, ev.onset_s);
      if (ov > best) {
        best = ov;
        best_ev = &ev;
      }
    }
    if (best_ev && best >= 0.5 * (cell_end - cell_begin)) {
      gt.active[t] = 1;
      gt.doa[t] = best_ev->direction;
    }
  }
  return gt;
}

OracleComponents oracle_components(const SceneRender& r, const StftConfig& cfg) {
  OracleComponents out;
  out.total = intensity_field(stft_foa(r.mixture, cfg));
  out.direct = intensity_field(stft_foa(r.direct, cfg));
  out.reverb_noise = out.total;
  for (std::size_t f = 0; f < out.total.num_bands(); ++f)
    for (std::size_t t = 0; t < out.total.num_frames(); ++t)
      out.reverb_noise.iv[f][t] = out.total.iv[f][t] - out.direct.iv[f][t];
  return out;
}

MaskField oracle_mask(const SceneRender& r, const StftConfig& cfg, double eps) {
  const SpectrogramSet sp_direct = stft_foa(r.direct, cfg);
  FoaSignal rest = r.reverb;
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < rest.channels[c].size(); ++i)
      rest.channels[c][i] += r.noise.channels[c][i];
  const SpectrogramSet sp_rest = stft_foa(rest, cfg);

  MaskField out;
  out.domain = BandDomain::Linear;
  out.m.assign(sp_direct.num_bins(), std::vector<double>(sp_direct.num_frames()));
  for (std::size_t f = 0; f < sp_direct.num_bins(); ++f) {
    for (std::size_t t = 0; t < sp_direct.num_frames(); ++t) {
      const double es = std::norm(sp_direct.w.bins[f][t]) + std::norm(sp_direct.x.bins[f][t]) +
                        std::norm(sp_direct.y.bins[f][t]) + std::norm(sp_direct.z.bins[f][t]);
      const double ern = std::norm(sp_rest.w.bins[f][t]) + std::norm(sp_rest.x.bins[f][t]) +
                         std::norm(sp_rest.y.bins[f][t]) + std::norm(sp_rest.z.bins[f][t]);
      out.m[f][t] = es / (es + ern + eps);
    }
  }
  return out;
}

}  // namespace ivdoa
