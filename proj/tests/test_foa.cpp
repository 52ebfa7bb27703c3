#include <doctest.h>

#include <cmath>

#include "ivdoa/foa.hpp"
#include "ivdoa/rng.hpp"
#include "test_util.hpp"

using namespace ivdoa;

namespace {

SpectrogramSet tiny_set(std::size_t bins, std::size_t frames) {
  SpectrogramSet sp;
  for (ComplexSpectrogram* c : {&sp.w, &sp.x, &sp.y, &sp.z}) {
    c->bins.assign(bins, std::vector<std::complex<double>>(frames, {0.0, 0.0}));
    c->fft_size = (bins - 1) * 2;
    c->hop = 1;
    c->sample_rate = 48000.0;
  }
  return sp;
}

}  // namespace

TEST_CASE("steering vector matches the ideal FOA response") {
  const auto h0 = steering_vector({0.0, 0.0});
  CHECK(h0.w == doctest::Approx(0.5773502691896258).epsilon(1e-12));
  CHECK(h0.x == doctest::Approx(1.0));
  CHECK(h0.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(h0.z == doctest::Approx(0.0).epsilon(1e-12));

  const auto h90 = steering_vector({kPi / 2.0, 0.0});
  CHECK(h90.w == doctest::Approx(0.5773502691896258));
  CHECK(std::abs(h90.x) < 1e-12);
  CHECK(h90.y == doctest::Approx(1.0));

  const auto pole = steering_vector({1.234, kPi / 2.0});
  CHECK(pole.w == doctest::Approx(0.5773502691896258));
  CHECK(pole.x == 0.0);  // exact zero at the pole
  CHECK(pole.y == 0.0);
  CHECK(pole.z == 1.0);
}

TEST_CASE("encode_plane_wave scales the source by the steering gains") {
  MonoSignal impulse;
  impulse.samples = {1.0, 0.0};
  const auto foa = encode_plane_wave(impulse, {0.0, 0.0});
  CHECK(foa.channels[0][0] == doctest::Approx(0.5773502691896258));
  CHECK(foa.channels[1][0] == doctest::Approx(1.0));
  CHECK(foa.channels[2][0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(foa.channels[3][0] == doctest::Approx(0.0).epsilon(1e-12));

  SUBCASE("pole encoding has exactly zero X and Y") {
    const auto s = test_util::white_noise(64, 3);
    const auto pole = encode_plane_wave(s, {0.7, -kPi / 2.0});
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(pole.channels[1][i] == 0.0);
      CHECK(pole.channels[2][i] == 0.0);
    }
  }

  SUBCASE("encoding is linear over sources") {
    const auto a = test_util::white_noise(32, 4);
    const auto b = test_util::white_noise(32, 5);
    MonoSignal sum;
    sum.samples.resize(32);
    for (std::size_t i = 0; i < 32; ++i) sum.samples[i] = a.samples[i] + b.samples[i];
    const Direction d{0.4, -0.2};
    const auto ea = encode_plane_wave(a, d), eb = encode_plane_wave(b, d),
               es = encode_plane_wave(sum, d);
    for (int c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < 32; ++i)
        CHECK(es.channels[c][i] == doctest::Approx(ea.channels[c][i] + eb.channels[c][i]));
  }
}

TEST_CASE("intensity field conjugate algebra") {
  auto sp = tiny_set(3, 2);
  sp.w.bins[1][0] = {1.0, 0.0};
  sp.x.bins[1][0] = {1.0, 0.0};
  auto iv = intensity_field(sp);
  CHECK(iv.iv[1][0].x == doctest::Approx(1.0));
  CHECK(iv.iv[1][0].y == 0.0);
  CHECK(iv.iv[1][0].z == 0.0);

  // W = i, X = i: Re(conj(i) * i) = Re(1) = 1
  sp.w.bins[2][1] = {0.0, 1.0};
  sp.x.bins[2][1] = {0.0, 1.0};
  iv = intensity_field(sp);
  CHECK(iv.iv[2][1].x == doctest::Approx(1.0));
}

TEST_CASE("plane-wave IV is parallel to the source direction at every energetic bin") {
  const Direction d{0.9, 0.3};
  const auto sig = encode_plane_wave(test_util::white_noise(2048, 17), d);
  const auto sp = stft_foa(sig, {512, 128});
  const auto iv = intensity_field(sp);
  const Vec3 u = unit_vector(d);
  for (std::size_t f = 0; f < iv.num_bands(); ++f) {
    for (std::size_t t = 0; t < iv.num_frames(); ++t) {
      const Vec3& v = iv.iv[f][t];
      if (v.norm() < 1e-12) continue;
      CHECK(test_util::angle_between_deg(v, u) < 1e-6);
      CHECK(v.dot(u) >= 0.0);
    }
  }
}

TEST_CASE("energy mask closed forms") {
  auto sp = tiny_set(2, 1);
  const PhysicalConstants k;
  const double lambda = k.lambda();
  CHECK(lambda == doctest::Approx(1.0 / (2.0 * 1.2 * 343.0 * 343.0)).epsilon(1e-12));

  sp.w.bins[0][0] = {1.0, 0.0};
  auto m = energy_mask(sp, k);
  CHECK(m.m[0][0] == doctest::Approx(lambda).epsilon(1e-12));
  CHECK(m.m[1][0] == 0.0);

  sp.x.bins[0][0] = {0.0, 1.0};
  sp.y.bins[0][0] = {-1.0, 0.0};
  sp.z.bins[0][0] = {0.0, -1.0};
  m = energy_mask(sp, k);
  CHECK(m.m[0][0] == doctest::Approx(2.0 * lambda).epsilon(1e-12));

  SUBCASE("nonnegative, zero exactly where all channels vanish") {
    for (const auto& row : m.m)
      for (const double v : row) CHECK(v >= 0.0);
    CHECK(m.m[1][0] == 0.0);
  }
}

TEST_CASE("normalize_iv") {
  IntensityField f;
  f.iv = {{Vec3{3.0, 4.0, 0.0}, Vec3{0.0, 0.0, 0.0}}};
  const auto out = normalize_iv(f);
  CHECK(out.iv[0][0].x == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(out.iv[0][0].y == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(out.iv[0][1].x == 0.0);
  CHECK(out.iv[0][1].y == 0.0);
  CHECK(out.iv[0][1].z == 0.0);

  SUBCASE("random vectors keep direction, norm in [0,1]") {
    Rng rng(31);
    IntensityField g;
    g.iv.assign(1, std::vector<Vec3>(200));
    for (auto& v : g.iv[0]) v = {rng.normal(), rng.normal(), rng.normal()};
    const auto n = normalize_iv(g);
    for (std::size_t t = 0; t < 200; ++t) {
      const double nn = n.iv[0][t].norm();
      CHECK(nn >= 0.0);
      CHECK(nn <= 1.0 + 1e-12);
      CHECK(test_util::angle_between_deg(n.iv[0][t], g.iv[0][t]) < 1e-6);
    }
  }

  CHECK_THROWS_AS(normalize_iv(f, 0.0), std::invalid_argument);
}

TEST_CASE("aggregate_refined") {
  Rng rng(41);
  const std::size_t bands = 5, frames = 4;
  IntensityField iv, reverb;
  MaskField mask;
  iv.iv.assign(bands, std::vector<Vec3>(frames));
  reverb.iv.assign(bands, std::vector<Vec3>(frames));
  mask.m.assign(bands, std::vector<double>(frames));
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t t = 0; t < frames; ++t) {
      iv.iv[b][t] = {rng.normal(), rng.normal(), rng.normal()};
      reverb.iv[b][t] = {rng.normal(), rng.normal(), rng.normal()};
      mask.m[b][t] = rng.uniform();
    }

  SUBCASE("matches the naive triple-loop oracle") {
    const auto out = aggregate_refined(iv, &mask, &reverb);
    for (std::size_t t = 0; t < frames; ++t) {
      Vec3 oracle{};
      for (std::size_t b = 0; b < bands; ++b) {
        oracle.x += mask.m[b][t] * (iv.iv[b][t].x - reverb.iv[b][t].x);
        oracle.y += mask.m[b][t] * (iv.iv[b][t].y - reverb.iv[b][t].y);
        oracle.z += mask.m[b][t] * (iv.iv[b][t].z - reverb.iv[b][t].z);
      }
      CHECK(out[t].x == doctest::Approx(oracle.x).epsilon(1e-12));
      CHECK(out[t].y == doctest::Approx(oracle.y).epsilon(1e-12));
      CHECK(out[t].z == doctest::Approx(oracle.z).epsilon(1e-12));
    }
  }

  SUBCASE("reverb equal to iv cancels everything") {
    const auto out = aggregate_refined(iv, &mask, &iv);
    for (const auto& v : out) CHECK(v.norm() == 0.0);
  }

  SUBCASE("absent mask and reverb degenerate to a plain band sum") {
    IntensityField single;
    single.iv.assign(1, iv.iv[2]);
    const auto out = aggregate_refined(single, nullptr, nullptr);
    for (std::size_t t = 0; t < frames; ++t) {
      CHECK(out[t].x == doctest::Approx(iv.iv[2][t].x));
      CHECK(out[t].y == doctest::Approx(iv.iv[2][t].y));
    }
  }

  SUBCASE("linear in iv and reverb separately") {
    IntensityField iv2 = iv;
    for (auto& row : iv2.iv)
      for (auto& v : row) v = v * 3.0;
    const auto base = aggregate_refined(iv, &mask, &reverb);
    const auto scaled = aggregate_refined(iv2, &mask, &reverb);
    const auto rev_only = aggregate_refined(reverb, &mask, nullptr);
    for (std::size_t t = 0; t < frames; ++t) {
      // 3*iv - reverb = 3*(iv - reverb) + 2*reverb
      CHECK(scaled[t].x == doctest::Approx(3.0 * base[t].x + 2.0 * rev_only[t].x).epsilon(1e-10));
      CHECK(scaled[t].y == doctest::Approx(3.0 * base[t].y + 2.0 * rev_only[t].y).epsilon(1e-10));
      CHECK(scaled[t].z == doctest::Approx(3.0 * base[t].z + 2.0 * rev_only[t].z).epsilon(1e-10));
    }
  }

  SUBCASE("shape and domain mismatches throw") {
    MaskField bad;
    bad.m.assign(bands + 1, std::vector<double>(frames, 1.0));
    CHECK_THROWS_AS(aggregate_refined(iv, &bad, nullptr), std::invalid_argument);
    MaskField mel_mask = mask;
    mel_mask.domain = BandDomain::Mel;
    CHECK_THROWS_AS(aggregate_refined(iv, &mel_mask, nullptr), std::invalid_argument);
  }
}

TEST_CASE("extract_doa conventions") {
  auto e = extract_doa({1.0, 0.0, 0.0});
  CHECK(e.dir.azimuth == 0.0);
  CHECK(e.dir.elevation == 0.0);
  CHECK(!e.azimuth_degenerate);
  CHECK(!e.zero);

  e = extract_doa({1.0, 1.0, 0.0});
  CHECK(e.dir.azimuth == doctest::Approx(kPi / 4.0));
  CHECK(e.dir.elevation == doctest::Approx(0.0));

  e = extract_doa({0.0, 0.0, 1.0});
  CHECK(e.dir.azimuth == 0.0);
  CHECK(e.dir.elevation == doctest::Approx(kPi / 2.0));
  CHECK(e.azimuth_degenerate);
  CHECK(!e.zero);

  e = extract_doa({0.0, 0.0, 0.0});
  CHECK(e.dir.azimuth == 0.0);
  CHECK(e.dir.elevation == 0.0);
  CHECK(e.zero);
}

TEST_CASE("extract_doa is scale invariant") {
  Rng rng(53);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double c = std::exp(rng.uniform(-6.0, 6.0));
    const auto a = extract_doa(v);
    const auto b = extract_doa(v * c);
    CHECK(a.dir.azimuth == doctest::Approx(b.dir.azimuth).epsilon(1e-12));
    CHECK(a.dir.elevation == doctest::Approx(b.dir.elevation).epsilon(1e-12));
  }
}

TEST_CASE("anechoic recovery over the 10-degree grid") {
  // encode -> stft -> iv -> band sum over one frame -> extract
  const auto noise = test_util::white_noise(700, 77);
  const StftConfig cfg{512, 512};
  for (int az = -180; az < 180; az += 10) {
    for (int el = -90; el <= 90; el += 10) {
      const Direction d = direction_from_degrees(az, el);
      const auto sp = stft_foa(encode_plane_wave(noise, d), cfg);
      const auto frames = aggregate_refined(intensity_field(sp), nullptr, nullptr);
      const auto est = extract_doa(frames[0]);
      const Vec3 truth = unit_vector(d);
      const Vec3 got = unit_vector(est.dir);
      CHECK(test_util::angle_between_deg(got, truth) * kPi / 180.0 < 1e-6);
    }
  }
}

TEST_CASE("mask scaling does not change the extracted DOA") {
  Rng rng(61);
  const std::size_t bands = 6, frames = 3;
  IntensityField iv;
  MaskField mask;
  iv.iv.assign(bands, std::vector<Vec3>(frames));
  mask.m.assign(bands, std::vector<double>(frames));
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t t = 0; t < frames; ++t) {
      iv.iv[b][t] = {rng.normal(), rng.normal(), rng.normal()};
      mask.m[b][t] = rng.uniform();
    }
  MaskField scaled = mask;
  for (auto& row : scaled.m)
    for (double& v : row) v *= 42.0;
  const auto a = aggregate_refined(iv, &mask, nullptr);
  const auto b = aggregate_refined(iv, &scaled, nullptr);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto ea = extract_doa(a[t]), eb = extract_doa(b[t]);
    CHECK(ea.dir.azimuth == doctest::Approx(eb.dir.azimuth).epsilon(1e-10));
    CHECK(ea.dir.elevation == doctest::Approx(eb.dir.elevation).epsilon(1e-10));
  }
}

TEST_CASE("mel_compress_iv compresses each component like apply_mel") {
  const auto fb = mel_filterbank(8, 256, 48000.0);
  Rng rng(71);
  IntensityField lin;
  lin.iv.assign(fb.num_bins(), std::vector<Vec3>(3));
  for (auto& row : lin.iv)
    for (auto& v : row) v = {rng.normal(), rng.normal(), rng.normal()};
  const auto mel = mel_compress_iv(fb, lin);
  CHECK(mel.domain == BandDomain::Mel);
  REQUIRE(mel.num_bands() == 8);
  for (std::size_t b = 0; b < 8; ++b)
    for (std::size_t t = 0; t < 3; ++t) {
      Vec3 oracle{};
      for (std::size_t f = 0; f < fb.num_bins(); ++f) {
        oracle.x += fb.weights[b][f] * lin.iv[f][t].x;
        oracle.y += fb.weights[b][f] * lin.iv[f][t].y;
        oracle.z += fb.weights[b][f] * lin.iv[f][t].z;
      }
      CHECK(mel.iv[b][t].x == doctest::Approx(oracle.x).epsilon(1e-10));
      CHECK(mel.iv[b][t].y == doctest::Approx(oracle.y).epsilon(1e-10));
      CHECK(mel.iv[b][t].z == doctest::Approx(oracle.z).epsilon(1e-10));
    }
}
